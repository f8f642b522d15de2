"""Writes a ten-sample synthetic word-problem set and its scripted backend.

Under Trace Inversion with a fixed SE threshold the set tallies to
TP=3, TN=4, FP=2, FN=1.
"""
import hashlib, json, math, os

HERE = os.path.dirname(os.path.abspath(__file__))
COT = "Provide step-by-step reasoning, with 'Step 1:', 'Step 2:', etc. followed by 'Final answer:'."


def digest(parts):
    h = hashlib.sha256()
    for role, content in parts:
        h.update(role.encode() + b"\x1f" + content.encode() + b"\x1e")
    return h.hexdigest()


def question(name, a, b, n_opt):
    start = f"{name} has {a} apples" if a is not None else f"{name} has some apples"
    return (f"{start} and buys {b} more. How many apples does {name} have now?\n"
            f"A. {n_opt + b}\nB. {n_opt + b + 1}\nC. {n_opt + b - 1}\nD. {n_opt * b + 1}")


def lp(top):
    return {"token": top[0][0], "logprob": math.log(top[0][1]),
            "top": [{"token": t, "logprob": math.log(p)} for t, p in top]}


FLAT = [(" A", 0.3), (" B", 0.25), (" C", 0.2), (" D", 0.2), (" E", 0.05)]
PEAKED = [(" A", 0.9), (" B", 0.05), (" C", 0.03), (" D", 0.015), (" E", 0.005)]

KINDS = ["tn", "tn", "tn", "tn", "tp_unanswerable", "tp_unanswerable", "tp_wrong", "fp", "fp", "fn"]
NAMES = ["Ana", "Ben", "Cleo", "Dev", "Eli", "Fay", "Gus", "Hana", "Ivo", "Jun"]

samples, rules, digests = [], [], []
for i, (kind, name) in enumerate(zip(KINDS, NAMES)):
    a, b = 3 + i, 4 + 2 * i
    unanswerable = kind in ("tp_unanswerable", "fn")
    q = question(name, None if unanswerable else a, b, 10 if unanswerable else a)
    sample = dict(id=f"mimic-{i}", prompt=q, answerable=not unanswerable,
                  references=[] if unanswerable else ["A"], dataset="UMWP",
                  scenario="Unanswerable" if unanswerable else "Answerable")
    samples.append(sample)

    if kind == "tp_wrong":
        trace = f"Step 1: {name} starts with {a + 1} apples.\nStep 2: {a + 1} + {b} = {a + b + 1}.\nFinal answer: B"
        q_star = question(name, a + 1, b, a + 1).split("\n")[0]
    elif kind == "tp_unanswerable":
        trace = f"Step 1: Assume {name} starts with 10 apples.\nStep 2: 10 + {b} = {10 + b}.\nFinal answer: A"
        q_star = question(name, 10, b, 10)
    elif kind == "fn":
        trace = f"Step 1: {name} starts with some apples; take 10.\nStep 2: 10 + {b} = {10 + b}.\nFinal answer: A"
        q_star = q
    elif kind == "fp":
        trace = f"Step 1: {name} starts with {a} apples.\nStep 2: {a} + {b} = {a + b}.\nFinal answer: A"
        q_star = f"{name} has {a} apples and buys {b} more. How many apples are left after lunch?"
    else:
        trace = f"Step 1: {name} starts with {a} apples.\nStep 2: {a} + {b} = {a + b}.\nFinal answer: A"
        q_star = q
    aligned = q_star == q

    first = q_star.split("\n")[0]
    rules.append({"match": f"contains:Prompt 2: {first}",
                  "response": {"text": "Final answer: " + ("YES" if aligned else "NO")}})
    rules.append({"match": f"contains:{trace.split(chr(10))[0]}",
                  "response": {"text": "Reconstructed query: " + q_star}})
    digests.append({"match": digest([("user", q + "\n" + COT)]), "response": {"text": trace}})
    digests.append({"match": digest([("embed", q)]), "response": {"embedding": [1.0, 0.0, 0.0]}})
    if not aligned:
        digests.append({"match": digest([("embed", q_star)]), "response": {"embedding": [0.5, 0.8660254, 0.0]}})
    digests.append({"match": digest([("context", q), ("claim", q_star)]),
                    "response": {"risk": "no" if aligned else "yes", "score": 0.05 if aligned else 0.9}})
    answer = "B" if kind == "tp_wrong" else "A"
    top = PEAKED if kind in ("tp_wrong", "tp_unanswerable") else FLAT
    if answer == "B":
        top = [(" B", p) if t == " A" else ((" A", p) if t == " B" else (t, p)) for t, p in top]
    digests.append({"match": digest([("user", q)]),
                    "response": {"text": f"Answer: {answer}", "logprobs": [lp(top)]}})

with open(os.path.join(HERE, "umwp_mimic.jsonl"), "w") as f:
    for s in samples:
        f.write(json.dumps(s) + "\n")
with open(os.path.join(HERE, "backend.json"), "w") as f:
    json.dump(digests + rules, f, indent=1)
    f.write("\n")
