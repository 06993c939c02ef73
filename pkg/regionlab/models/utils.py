import numpy as np


def softmax(logits):
    # Returns the soft-max probability distribution over classes
    # The max is removed first so that exp never overflows
    shifted = logits - np.max(logits)
    p = np.exp(shifted)
    return p / p.sum()


def log_softmax(logits):
    shifted = logits - np.max(logits)
    return shifted - np.log(np.exp(shifted).sum())


def top_two(logits):
    # Indices (k1, k2) of the two largest logits, ties broken by the lowest index
    order = np.argsort(-np.asarray(logits), kind="stable")
    return int(order[0]), int(order[1])


def cosine(a, b):
    # Cosine similarity clipped to [-1, 1], NaN when one vector is zero
    na = np.linalg.norm(a)
    nb = np.linalg.norm(b)
    if na == 0.0 or nb == 0.0:
        return float("nan")
    return float(np.clip(a @ b / (na * nb), -1.0, 1.0))


def uniform_bin_counts(values, bins, value_range):
    # Counts per uniform bin, the last bin is closed on the right
    counts, edges = np.histogram(np.asarray(values, dtype=np.float64), bins=bins, range=value_range)
    return counts, edges
