greeting = "hello world"
