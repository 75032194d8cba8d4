for j in range(2, n + 1):
    product *= j
