n //= 10
