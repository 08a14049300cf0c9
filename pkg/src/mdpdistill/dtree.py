"""Binary decision trees over state valuations and action attributes.

Internal nodes test either a threshold on one state variable ([x <= k],
with k the floored midpoint between two observed values) or equality on a
categorical coordinate (action name or owning module). Splits maximize
weighted information gain; exact ties fall to the earliest coordinate,
thresholds before equalities, then the smallest constant, so learning is
deterministic. Pruning replaces a subtree by a leaf when the leaf's
pessimistic error (a normal upper confidence bound on the training error)
does not exceed the subtree's.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.stats import norm

from .core import ActionAttr, LiberalStrategy, Mdp
from .importance import Domain, TrainingSet

COORD_ACTION = "action"
COORD_MODULE = "module"


@dataclass(frozen=True)
class Pred:
    """One test: kind 'le' on a variable, or equality on a categorical."""

    kind: str                 # "le" | "action" | "module"
    coord: int = 0            # variable index, used by "le"
    k: Union[int, str] = 0    # threshold, action name, or module index

    def holds(self, x: Sequence[int], attr: Optional[ActionAttr]) -> bool:
        if self.kind == "le":
            return x[self.coord] <= self.k
        if attr is None:
            return False
        if self.kind == COORD_ACTION:
            return attr.name == self.k
        return attr.module == self.k

    def describe(self, domain: Domain) -> str:
        if self.kind == "le":
            return f"{domain.var_decls[self.coord][0]}<={self.k}"
        return f"{self.kind}={self.k}"


@dataclass
class Leaf:
    good: bool
    n: float = 0.0   # training weight that reached the leaf
    e: float = 0.0   # weight of misclassified training rows


@dataclass
class Split:
    pred: Pred
    yes: "Node"
    no: "Node"
    n: float = 0.0
    e: float = 0.0   # errors if this node were collapsed to a majority leaf


Node = Union[Leaf, Split]


@dataclass
class DTree:
    root: Node
    domain: Domain

    def classify(self, x: Sequence[int], attr: Optional[ActionAttr] = None) -> bool:
        node = self.root
        while isinstance(node, Split):
            node = node.yes if node.pred.holds(x, attr) else node.no
        return node.good

    @property
    def size(self) -> int:
        return tree_size(self.root)


def tree_size(node: Node) -> int:
    if isinstance(node, Leaf):
        return 1
    return 1 + tree_size(node.yes) + tree_size(node.no)


def _entropy(wg: float, wb: float) -> float:
    n = wg + wb
    if n <= 0 or wg <= 0 or wb <= 0:
        return 0.0
    pg, pb = wg / n, wb / n
    return -(pg * math.log2(pg) + pb * math.log2(pb))


def _coord_key(p: Pred, domain: Domain) -> Tuple[int, int, int]:
    if p.kind == "le":
        return (p.coord, 0, int(p.k))
    if p.kind == COORD_ACTION:
        return (domain.n_vars, 1, domain.action_index(p.k))
    return (domain.n_vars + 1, 1, int(p.k))


def learn(ts: TrainingSet, *, min_leaf: float = 1.0, confidence: float = 0.25,
          prune: bool = True) -> DTree:
    """Grow a tree on the training rows, then optionally prune it.

    `min_leaf` is the minimum total row weight each side of a split must
    keep; raising it is the main lever for trading accuracy against size.
    """
    if not ts.rows:
        return DTree(Leaf(True), ts.domain)
    domain = ts.domain
    nv = domain.n_vars
    m = len(ts.rows)
    X = np.array([r.x for r in ts.rows], dtype=np.int64).reshape(m, nv)
    act = np.array([domain.action_index(r.attr.name) if r.attr is not None else -1
                    for r in ts.rows], dtype=np.int64)
    mod = np.array([r.attr.module if r.attr is not None else -1
                    for r in ts.rows], dtype=np.int64)
    y = np.array([r.good for r in ts.rows], dtype=bool)
    w = np.array([r.weight for r in ts.rows], dtype=np.float64)

    def masked(p: Pred, idx: np.ndarray) -> np.ndarray:
        if p.kind == "le":
            return X[idx, p.coord] <= p.k
        if p.kind == COORD_ACTION:
            return act[idx] == domain.action_index(p.k)
        return mod[idx] == p.k

    def candidates(idx: np.ndarray) -> List[Pred]:
        out: List[Pred] = []
        for j in range(nv):
            vals = np.unique(X[idx, j])
            for a, b in zip(vals, vals[1:]):
                out.append(Pred("le", j, int((int(a) + int(b)) // 2)))
        names = sorted({int(v) for v in np.unique(act[idx]) if v >= 0})
        out.extend(Pred(COORD_ACTION, 0, domain.action_names[v]) for v in names)
        mods = sorted({int(v) for v in np.unique(mod[idx]) if v >= 0})
        out.extend(Pred(COORD_MODULE, 0, v) for v in mods)
        return out

    def grow(idx: np.ndarray) -> Node:
        wg = float(w[idx][y[idx]].sum())
        wb = float(w[idx][~y[idx]].sum())
        total = wg + wb
        majority = wg >= wb
        err = min(wg, wb)
        if wg == 0.0 or wb == 0.0:
            return Leaf(majority, total, err)
        parent_h = _entropy(wg, wb)
        best: Optional[Tuple[float, Tuple[int, int, int], Pred, np.ndarray]] = None
        for p in candidates(idx):
            mask = masked(p, idx)
            wl = float(w[idx][mask].sum())
            wr = total - wl
            if wl < min_leaf or wr < min_leaf:
                continue
            wlg = float(w[idx][mask & y[idx]].sum())
            wrg = wg - wlg
            gain = parent_h - (wl * _entropy(wlg, wl - wlg)
                               + wr * _entropy(wrg, wr - wrg)) / total
            if gain <= 1e-12:
                continue
            key = _coord_key(p, domain)
            if best is None or gain > best[0] + 1e-12 or (
                    abs(gain - best[0]) <= 1e-12 and key < best[1]):
                best = (gain, key, p, mask)
        if best is None:
            # a perfectly balanced boundary zeroes out every gain while the
            # rows stay separable; split anyway so an unrestricted tree
            # always fits its training set
            for p in sorted(candidates(idx),
                            key=lambda c: _coord_key(c, domain)):
                mask = masked(p, idx)
                wl = float(w[idx][mask].sum())
                if wl < min_leaf or total - wl < min_leaf:
                    continue
                if not mask.any() or mask.all():
                    continue
                return Split(p, grow(idx[mask]), grow(idx[~mask]), total, err)
            return Leaf(majority, total, err)
        _, _, p, mask = best
        node = Split(p, grow(idx[mask]), grow(idx[~mask]), total, err)
        return node

    root = grow(np.arange(m))
    if prune:
        z = float(norm.ppf(1.0 - confidence))
        root, _ = _prune(root, max(z, 0.0))
    return DTree(root, domain)


def _ucb_errors(e: float, n: float, z: float) -> float:
    """Upper confidence bound on the error count at a node of weight n."""
    if n <= 0:
        return 0.0
    f = e / n
    if z == 0.0:
        return e
    z2 = z * z
    ub = (f + z2 / (2 * n) + z * math.sqrt(f * (1 - f) / n + z2 / (4 * n * n)))
    return n * min(1.0, ub / (1 + z2 / n))


def _prune(node: Node, z: float) -> Tuple[Node, float]:
    if isinstance(node, Leaf):
        return node, _ucb_errors(node.e, node.n, z)
    yes, e_yes = _prune(node.yes, z)
    no, e_no = _prune(node.no, z)
    as_subtree = e_yes + e_no
    as_leaf = _ucb_errors(node.e, node.n, z)
    if as_leaf <= as_subtree:
        # node.e counts the minority weight; recover the majority label from
        # the children's training stats
        wg = _good_weight(node)
        return Leaf(wg >= node.n - wg, node.n, node.e), as_leaf
    return Split(node.pred, yes, no, node.n, node.e), as_subtree


def _good_weight(node: Node) -> float:
    if isinstance(node, Leaf):
        return node.n - node.e if node.good else node.e
    return _good_weight(node.yes) + _good_weight(node.no)


def induce_strategy(mdp: Mdp, tree: DTree) -> Tuple[LiberalStrategy, List[int]]:
    """Read the tree back as a liberal strategy on the whole state space.

    At each non-target state the strategy keeps the actions the tree calls
    good. States where it rejects everything stay open (uniform fallback);
    they are returned so callers can report how often that happened.
    """
    choice = {}
    fallback: List[int] = []
    for s in range(mdp.n_states):
        if s in mdp.target:
            continue
        vec = mdp.states[s]
        keep = frozenset(i for i, a in enumerate(mdp.actions[s])
                         if tree.classify(vec, a.attr))
        if keep:
            choice[s] = keep
        else:
            fallback.append(s)
    return LiberalStrategy(choice), fallback


# --------------------------------------------------------------------------
# Serialization.

def _node_to_obj(node: Node):
    if isinstance(node, Leaf):
        return {"leaf": bool(node.good)}
    p = node.pred
    if p.kind == "le":
        pobj = {"coord": p.coord, "op": "le", "k": int(p.k)}
    else:
        pobj = {"cat": p.kind, "v": p.k}
    return {"p": pobj, "yes": _node_to_obj(node.yes), "no": _node_to_obj(node.no)}


def _node_from_obj(obj) -> Node:
    if "leaf" in obj:
        return Leaf(bool(obj["leaf"]))
    p = obj["p"]
    if "cat" in p:
        pred = Pred(p["cat"], 0, p["v"])
    else:
        pred = Pred("le", int(p["coord"]), int(p["k"]))
    return Split(pred, _node_from_obj(obj["yes"]), _node_from_obj(obj["no"]))


def export_json(tree: DTree) -> str:
    obj = {
        "domain": {
            "vars": [[n, lo, hi] for n, lo, hi in tree.domain.var_decls],
            "actions": list(tree.domain.action_names),
            "modules": tree.domain.module_count,
        },
        "root": _node_to_obj(tree.root),
    }
    return json.dumps(obj, sort_keys=True, separators=(",", ":")) + "\n"


def import_json(text: str) -> DTree:
    obj = json.loads(text)
    d = obj["domain"]
    domain = Domain(tuple((n, int(lo), int(hi)) for n, lo, hi in d["vars"]),
                    tuple(d["actions"]), int(d["modules"]))
    return DTree(_node_from_obj(obj["root"]), domain)


def export_dot(tree: DTree) -> str:
    lines = ["digraph dtree {", "  node [shape=box];"]
    counter = [0]

    def walk(node: Node) -> int:
        nid = counter[0]
        counter[0] += 1
        if isinstance(node, Leaf):
            lines.append(f'  n{nid} [label="{"good" if node.good else "bad"}",'
                         f' shape=ellipse];')
            return nid
        lines.append(f'  n{nid} [label="{node.pred.describe(tree.domain)}"];')
        yid = walk(node.yes)
        nid_no = walk(node.no)
        lines.append(f"  n{nid} -> n{yid};")
        lines.append(f'  n{nid} -> n{nid_no} [style=dashed];')
        return nid

    walk(tree.root)
    lines.append("}")
    return "\n".join(lines) + "\n"


@dataclass
class FitResult:
    tree: DTree
    min_leaf: int
    budget_met: bool
    tried: List[Tuple[int, bool]] = field(default_factory=list)


def fit_max_leaf(ts: TrainingSet, accept: Callable[[DTree], bool], *,
                 confidence: float = 0.25, prune: bool = True,
                 hi: Optional[int] = None) -> FitResult:
    """Largest `min_leaf` whose tree still passes `accept` (smallest tree).

    Tree quality usually degrades monotonically as min_leaf grows, so a
    binary search finds the frontier quickly; because it need not be
    perfectly monotone the found value is re-verified and scanned downward
    if the re-check fails. If even min_leaf=1 is rejected, that tree is
    returned with budget_met False.
    """
    wg = sum(r.weight for r in ts.rows if r.good)
    wb = sum(r.weight for r in ts.rows if not r.good)
    if hi is None:
        hi = max(1, min(wg, wb) if min(wg, wb) > 0 else max(wg, wb))
    tried: List[Tuple[int, bool]] = []
    cache: Dict[int, DTree] = {}

    def tree_at(m: int) -> DTree:
        if m not in cache:
            cache[m] = learn(ts, min_leaf=m, confidence=confidence, prune=prune)
        return cache[m]

    def ok(m: int) -> bool:
        r = accept(tree_at(m))
        tried.append((m, r))
        return r

    if not ok(1):
        return FitResult(tree_at(1), 1, False, tried)
    lo = 1
    top = max(1, hi)
    while lo < top:
        mid = (lo + top + 1) // 2
        if ok(mid):
            lo = mid
        else:
            top = mid - 1
    m = lo
    if not ok(m):
        while m > 1:
            m -= 1
            if ok(m):
                break
    return FitResult(tree_at(m), m, True, tried)
