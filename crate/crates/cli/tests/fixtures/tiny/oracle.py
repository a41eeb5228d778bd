"""Writes model.ucr for the tiny fixture and prints the expected
retrospective summary for the search and similarity methods.

Pooling scorer: the representation is the sum of the unrevoked window
embeddings and an item's score is its dot product with it. Items already
in the (unrevoked) window are not recommended.
"""
import itertools
import struct
from fractions import Fraction

EMB = {1: (1, 0), 2: (0, 1), 3: (1, 1), 4: (1, 0.2), 5: (0.5, 0.5), 6: (0.2, 0.4)}
WINDOWS = {1: [1, 2, 3], 2: [4, 5, 6], 3: [2, 6, 1]}
GAMMA1 = 1


def dot(a, b):
    return sum(x * y for x, y in zip(a, b))


def top_k(window, revoked, k):
    rep = [0.0, 0.0]
    for t, item in enumerate(window):
        if t not in revoked:
            rep = [rep[0] + EMB[item][0], rep[1] + EMB[item][1]]
    seen = {item for t, item in enumerate(window) if t not in revoked}
    cands = [(-dot(rep, EMB[i]), i) for i in EMB if i not in seen]
    return [i for _, i in sorted(cands)[:k]], rep


def greedy(window, target, k):
    original, _ = top_k(window, set(), k)
    others = [q for q in original if q != target]
    direction = [EMB[target][d] - GAMMA1 * sum(EMB[q][d] for q in others) for d in range(2)]
    revoked = set()
    while len(revoked) < len(window):
        best = None
        for t in range(len(window)):
            if t in revoked:
                continue
            _, rep = top_k(window, revoked | {t}, k)
            h = dot(rep, direction)
            if best is None or h < best[0] - 1e-12 * (1 + abs(best[0])):
                best = (h, t)
        revoked.add(best[1])
        if target not in top_k(window, revoked, k)[0]:
            return revoked
    return None


def similarity(window, target, k):
    order = sorted(range(len(window)), key=lambda t: (-dot(EMB[window[t]], EMB[target]), t))
    revoked = set()
    for t in order:
        revoked.add(t)
        if target not in top_k(window, revoked, k)[0]:
            return revoked
    return None


def accuracy(original, after, target):
    removed = set(original) - set(after)
    union = removed | {target}
    return Fraction(len(removed & {target}), len(union))


def summary(method, k):
    comp, acc, attempts = [], [], 0
    for user, window in WINDOWS.items():
        original, _ = top_k(window, set(), k)
        for target in original:
            attempts += 1
            revoked = method(window, target, k)
            if revoked is None:
                continue
            after, _ = top_k(window, revoked, k)
            comp.append(Fraction(len(revoked), len(window)))
            acc.append(accuracy(original, after, target))
    mean = lambda xs: sum(xs) / len(xs) if xs else 0
    return attempts, len(comp), mean(comp), mean(acc)


def write_model(path):
    items = sorted(EMB)
    with open(path, "wb") as f:
        header = [
            "UCRMODEL 1", "byte_order little", "scalar f64", "kind pooling",
            f"n_items {len(items)}", "dim 2", "window 3", "trained 1", "tensors 1",
            f"tensor item_embedding {len(items)} 2", "end",
        ]
        f.write(("\n".join(header) + "\n").encode())
        for i in items:
            f.write(struct.pack("<2d", *map(float, EMB[i])))


if __name__ == "__main__":
    write_model("model.ucr")
    for k in (1, 2):
        for name, method in (("search", greedy), ("similarity", similarity)):
            attempts, successes, c, a = summary(method, k)
            print(f"{name},{k},{attempts},{successes},{float(c):.6f},{float(a):.6f}  ({c}, {a})")
