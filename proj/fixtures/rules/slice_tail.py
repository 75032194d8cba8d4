tail = data[2:]
