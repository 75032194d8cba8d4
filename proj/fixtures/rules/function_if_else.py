def classify(n):
    # sign and parity of n
    if n < 0:
        label = "negative"
    elif n == 0:
        label = "zero"
    else:
        label = "positive"
    if n % 2 == 0:
        print(label, "even")
    return label

