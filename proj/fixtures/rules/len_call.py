size = len(values)
