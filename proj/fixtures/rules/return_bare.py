def stop():
    return
