for word in words:
    print(word)
