"""Writes parsing_corpus.jsonl: model generations with the token each must parse to.

`marker` is true when the generation states its answer with an explicit marker.
"""
import json, os, random

rng = random.Random(20240611)
ABCD = ["A", "B", "C", "D"]
rows = []


def add(raw, options, expected, marker):
    rows.append({"raw": raw, "options": options, "expected": expected, "marker": marker})


def steps(options, avoid):
    others = [o for o in options if o != avoid]
    picks = rng.sample(others, k=min(2, len(others)))
    return "\n".join([
        f"Step 1: Option {picks[0]} ignores part of the question.",
        f"Step 2: Option {picks[-1]} contradicts the given facts.",
        "Step 3: Only one choice remains consistent.",
    ])


FINAL = ["Final answer: {x}", "Final Answer: **{x}**", "final answer: ({x})", "Final answer is {x}",
         "**Final answer:** {x}", "Final answer: option {x}", "Final answer: {x}.", "FINAL ANSWER: [{x}]"]
ANSWER = ["Answer: {x}", "Answer: ({x})", "**Answer:** {x}", "answer: {x}", "Answer: option {x}"]
CORRECT = ["The correct answer is {x}.", "I believe the correct answer is ({x}).", "So the correct answer is **{x}**"]

for i in range(64):
    opts = ABCD if i % 4 else ABCD + ["E"]
    x = rng.choice(opts)
    add(steps(opts, x) + "\n" + FINAL[i % len(FINAL)].format(x=x), opts, x, True)

for i in range(40):
    x = rng.choice(ABCD)
    body = rng.choice(["Adding the two amounts gives the total.", "The passage says so in its second paragraph.", ""])
    add((body + "\n" if body else "") + ANSWER[i % len(ANSWER)].format(x=x), ABCD, x, True)

for i in range(24):
    x = rng.choice(ABCD)
    add("Let me think about the choices.\n" + CORRECT[i % len(CORRECT)].format(x=x), ABCD, x, True)

for i in range(16):
    first, last = rng.sample(ABCD, 2)
    add(f"Final answer: {first}\nWait, re-checking step 2.\nFinal answer: {last}", ABCD, last, True)

for i in range(20):
    verdict = "YES" if i % 2 else "NO"
    form = ["Final answer: {v}", "{v}", "Final answer: **{v}**", "The two prompts differ in intent.\n{v}"][i % 4]
    add(form.format(v=verdict if i % 3 else verdict.lower()), ["YES", "NO"], verdict, "Final" in form)

for i in range(24):
    x = rng.choice(ABCD)
    wrap = ["{x}", "({x})", "**{x}**", "{x}.", "[{x}]"][i % 5]
    add(steps(ABCD, x) + "\n" + wrap.format(x=x), ABCD, x, False)

for i in range(24):
    x = rng.choice(["A", "B", "C"])
    tail = ["So I would go with {x}.", "That leaves {x} as the best choice", "Overall, {x} fits best.",
            "Therefore it must be {x}"][i % 4]
    add("Comparing the options carefully.\n" + tail.format(x=x), ["A", "B", "C"], x, False)

for i in range(4):
    add(["I cannot determine the answer from the information given.",
         "There is not enough information to decide.",
         "This question has no single correct response.",
         "It depends on context that is missing."][i], ABCD, "Z", False)

rng.shuffle(rows)
with open(os.path.join(os.path.dirname(os.path.abspath(__file__)), "parsing_corpus.jsonl"), "w") as f:
    for r in rows:
        f.write(json.dumps(r) + "\n")
print(len(rows), sum(r["expected"] == "Z" for r in rows))
