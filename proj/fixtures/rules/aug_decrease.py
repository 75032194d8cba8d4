balance -= fee
