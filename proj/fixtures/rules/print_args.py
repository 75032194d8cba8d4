print("total:", total)
