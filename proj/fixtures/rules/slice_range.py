middle = data[1:n]
