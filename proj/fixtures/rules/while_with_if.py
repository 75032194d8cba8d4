while i < len(items):
    if items[i] > best:
        best = items[i]
    i += 1
