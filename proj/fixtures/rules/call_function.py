process(data, verbose)
