for x in items:
    if x == target:
        break
else:
    print("missing")
