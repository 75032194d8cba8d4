ok = a <= b and c != d or not e
