"""
Scoring translations: edit distance with shifts, BLEU, and significance
=======================================================================

A walk through the three evaluation tools: TER (edit distance where a
block move counts as one edit), corpus BLEU, and paired approximate
randomization for deciding whether two systems actually differ.
"""

from markmt.metrics import approx_randomization, bleu, corpus_ter, ter_cost

# TER counts the cheapest way to turn a hypothesis into the reference
# using substitutions, insertions, deletions -- and block shifts, each
# costing one edit no matter how far the block travels.
hyp = "on saturday the market opens early".split()
ref = "the market opens early on saturday".split()
print("hypothesis:", " ".join(hyp))
print("reference: ", " ".join(ref))

# Plain edit distance would charge four edits for this rotation; a single
# shift of "on saturday" to the end does it in one.
print("edit cost without shifts:", ter_cost(hyp, ref, use_shifts=False))
print("edit cost with shifts:   ", ter_cost(hyp, ref))

# The corpus score is total edits over total reference length.
hyps = [hyp, "the talk was short".split()]
refs = [ref, "the talk was very short".split()]
print("corpus TER:", round(corpus_ter(hyps, refs), 4))

# BLEU rewards n-gram overlap instead of penalizing edits; 100 means an
# exact match, and the brevity penalty punishes short output.
print("BLEU identical:", round(bleu(refs, refs), 2))
print("BLEU hyps vs refs:", round(bleu(hyps, refs), 2))

# Are two systems really different, or is the gap noise?  Shuffle which
# system each sentence's score came from; the p-value is the share of
# shuffles with a gap at least as large as the observed one.
system_a = [0.20, 0.25, 0.10, 0.31, 0.22, 0.18, 0.27, 0.15]
system_b = [0.28, 0.30, 0.12, 0.36, 0.29, 0.21, 0.33, 0.19]
p = approx_randomization(system_a, system_b, n_shuffles=10_000, seed=7)
print("mean gap:", round(sum(b - a for a, b in zip(system_a, system_b)) / 8, 4))
print("p-value of the gap:", round(p, 4))

# The same test against itself can never look significant.
print("p-value system A vs itself:", approx_randomization(system_a, system_a, seed=7))
