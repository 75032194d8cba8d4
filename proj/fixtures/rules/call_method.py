result.append(value)
