for k in range(0, 100, 5):
    print(k)
