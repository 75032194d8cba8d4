backwards = text[::-1]
