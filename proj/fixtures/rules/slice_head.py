head = data[:3]
