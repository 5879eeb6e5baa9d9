"""Pure-Python kernel for the greedy BFS rule-sequence automaton.

Mirrors the compiled kernel in ``_speedups.pyx``; :mod:`stlclab.grammar`
picks whichever is importable.
"""

from __future__ import annotations


def consume_rules(ids, lhs_ids, child_off, child_flat, start_sym, n_content, eos_id, pad_id):
    """Run predicted rule ids through the pending-slot queue automaton.

    Returns the accepted content-rule ids when the sequence is a complete
    derivation of the start symbol, else ``None``.  ``eos`` stops
    consumption, ``pad`` entries are skipped, and anything inapplicable
    (wrong lhs for the front slot, rule after the queue has drained, an id
    outside the content range) rejects the sequence.
    """
    ids = list(ids)
    lhs_ids = list(lhs_ids)
    child_off = list(child_off)
    child_flat = list(child_flat)
    queue = [start_sym]
    head = 0
    accepted = []
    for rid in ids:
        if rid == eos_id:
            break
        if rid == pad_id:
            continue
        if rid < 0 or rid >= n_content:
            return None
        if head == len(queue):
            return None
        if lhs_ids[rid] != queue[head]:
            return None
        head += 1
        queue.extend(child_flat[child_off[rid]:child_off[rid + 1]])
        accepted.append(rid)
    if head != len(queue):
        return None
    return accepted
