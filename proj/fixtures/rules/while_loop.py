while lo < hi:
    lo += 1
