def area(r) -> float:
    return 3.14159 * r * r
