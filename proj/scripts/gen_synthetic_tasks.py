#!/usr/bin/env python3
"""Writes a deterministic MBPP-shaped task corpus of 974 records.

The records are template-built programming tasks (description plus a short
Python function). They exercise corpus loading, index construction and
retrieval at the size of the real benchmark; they are not the benchmark.

    python3 scripts/gen_synthetic_tasks.py fixtures/tasks/synthetic_974.jsonl
"""

import json
import random
import sys

COUNT = 974
SEED = 974

SUBJECTS = [
    ("list of integers", "nums"),
    ("list of floats", "values"),
    ("list of strings", "words"),
    ("tuple of numbers", "items"),
    ("list of prices", "prices"),
    ("list of scores", "scores"),
    ("list of temperatures", "temps"),
    ("list of ages", "ages"),
    ("list of distances", "dists"),
    ("list of weights", "weights"),
    ("sequence of lengths", "lengths"),
    ("array of readings", "readings"),
]

QUALIFIERS = [
    ("", "True"),
    ("that are positive", "x > 0"),
    ("that are negative", "x < 0"),
    ("that are even", "x % 2 == 0"),
    ("that are odd", "x % 2 == 1"),
    ("greater than a threshold", "x > limit"),
    ("smaller than a threshold", "x < limit"),
    ("divisible by three", "x % 3 == 0"),
    ("divisible by five", "x % 5 == 0"),
    ("not equal to zero", "x != 0"),
]

OPERATIONS = [
    ("count the elements", "count", "result = 0", "result += 1"),
    ("compute the sum of the elements", "total", "result = 0", "result += x"),
    ("compute the product of the elements", "product", "result = 1", "result *= x"),
    ("collect the elements", "collect", "result = []", "result.append(x)"),
    ("find the largest element", "largest", "result = None", "result = x if result is None or x > result else result"),
    ("find the smallest element", "smallest", "result = None", "result = x if result is None or x < result else result"),
    ("find the first element", "first", "result = None", "return x"),
    ("compute the sum of squares of the elements", "square_sum", "result = 0", "result += x * x"),
]

SUFFIX = ["", " and return the result", " using a loop", " in a single pass"]


def needs_limit(cond):
    return "limit" in cond


def build(rng, index):
    subj, var = rng.choice(SUBJECTS)
    qual, cond = rng.choice(QUALIFIERS)
    op, name, init, step = rng.choice(OPERATIONS)
    suffix = rng.choice(SUFFIX)
    text = "Write a function to " + op
    if qual:
        text += " " + qual
    text += " in a " + subj + suffix + "."
    params = var + (", limit" if needs_limit(cond) else "")
    fname = name + "_" + var + "_" + str(index)
    lines = ["def " + fname + "(" + params + "):", "    " + init, "    for x in " + var + ":"]
    if cond == "True":
        lines.append("        " + step)
    else:
        lines.append("        if " + cond + ":")
        lines.append("            " + step)
    lines.append("    return result")
    return text, "\n".join(lines)


def main():
    out = sys.argv[1] if len(sys.argv) > 1 else "synthetic_974.jsonl"
    rng = random.Random(SEED)
    with open(out, "w", encoding="utf-8", newline="\n") as f:
        for i in range(1, COUNT + 1):
            text, code = build(rng, i)
            f.write(json.dumps({"id": i, "text": text, "code": code}) + "\n")


if __name__ == "__main__":
    main()
