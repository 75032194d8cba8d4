scale *= 2
