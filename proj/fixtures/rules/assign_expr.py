area = width * height
