"""Reading pathway files and reducing them to gene-only undirected graphs.

A pathway file is line oriented::

    # comment
    node <node_id> <kind> <name>
    edge <node_id> <node_id>

``kind`` is one of ``gene``, ``compound``, ``map``, ``ortholog`` or ``other``.
Edges are undirected. The pathway id is the file stem.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import EmptyPathwayError, PathwayParseError

logger = logging.getLogger(__name__)

NODE_KINDS = ("gene", "compound", "map", "ortholog", "other")
PATHWAY_SUFFIXES = (".pathway", ".txt")


@dataclass(frozen=True)
class RawNode:
    node_id: str
    kind: str
    name: str


@dataclass(frozen=True)
class RawPathway:
    id: str
    nodes: tuple[RawNode, ...]
    edges: frozenset[frozenset[str]]

    def node(self, node_id: str) -> RawNode:
        for n in self.nodes:
            if n.node_id == node_id:
                return n
        raise KeyError(node_id)


@dataclass(frozen=True, eq=False)
class PathwayGraph:
    """Undirected gene graph; vertex ``i`` is ``genes[i]``."""

    id: str
    genes: tuple[str, ...]
    adjacency: np.ndarray = field(repr=False)

    def __post_init__(self):
        adj = np.asarray(self.adjacency, dtype=np.uint8)
        n = len(self.genes)
        if adj.shape != (n, n):
            raise ValueError(f"adjacency shape {adj.shape} does not match {n} genes")
        if len(set(self.genes)) != n:
            raise ValueError("gene symbols must be unique")
        if not np.array_equal(adj, adj.T):
            raise ValueError("adjacency must be symmetric")
        if np.any(np.diag(adj)):
            raise ValueError("adjacency must have a zero diagonal")
        adj.setflags(write=False)
        object.__setattr__(self, "adjacency", adj)

    @property
    def n_genes(self) -> int:
        return len(self.genes)

    def edges(self) -> list[tuple[int, int]]:
        rows, cols = np.nonzero(np.triu(self.adjacency, 1))
        return list(zip(rows.tolist(), cols.tolist()))

    def neighbors(self, v: int) -> list[int]:
        return np.flatnonzero(self.adjacency[v]).tolist()

    def index(self, gene: str) -> int:
        return self.genes.index(gene)

    @classmethod
    def from_edges(cls, pathway_id, genes, edges):
        """Build a graph from gene symbols and symbol pairs, sorting the vertices."""
        ordered = tuple(sorted(set(genes)))
        pos = {g: i for i, g in enumerate(ordered)}
        adj = np.zeros((len(ordered), len(ordered)), dtype=np.uint8)
        for a, b in edges:
            if a == b:
                continue
            adj[pos[a], pos[b]] = adj[pos[b], pos[a]] = 1
        return cls(pathway_id, ordered, adj)

    def __eq__(self, other):
        if not isinstance(other, PathwayGraph):
            return NotImplemented
        return (
            self.id == other.id
            and self.genes == other.genes
            and np.array_equal(self.adjacency, other.adjacency)
        )

    def __hash__(self):
        return hash((self.id, self.genes, self.adjacency.tobytes()))


def parse_pathway_file(text: str, pathway_id: str = "pathway", source=None) -> RawPathway:
    """Parse pathway text into a :class:`RawPathway`.

    Duplicate edges collapse to one, self-loops are dropped. Raises
    :class:`PathwayParseError` on malformed lines, duplicate node ids and
    edges whose endpoints were never declared.
    """
    nodes: dict[str, RawNode] = {}
    edge_lines: list[tuple[int, str, str]] = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split(None, 3)
        keyword = parts[0]
        if keyword == "node":
            if len(parts) != 4:
                raise PathwayParseError(
                    "expected 'node <id> <kind> <name>'", lineno, source
                )
            _, node_id, kind, name = parts
            if kind not in NODE_KINDS:
                raise PathwayParseError(f"unknown node kind {kind!r}", lineno, source)
            if node_id in nodes:
                raise PathwayParseError(f"duplicate node id {node_id!r}", lineno, source)
            nodes[node_id] = RawNode(node_id, kind, name.strip())
        elif keyword == "edge":
            if len(parts) != 3:
                raise PathwayParseError("expected 'edge <id> <id>'", lineno, source)
            edge_lines.append((lineno, parts[1], parts[2]))
        else:
            raise PathwayParseError(f"unknown record type {keyword!r}", lineno, source)

    edges = set()
    for lineno, a, b in edge_lines:
        for end in (a, b):
            if end not in nodes:
                raise PathwayParseError(
                    f"edge endpoint {end!r} is not a declared node", lineno, source
                )
        if a != b:
            edges.add(frozenset((a, b)))
    return RawPathway(pathway_id, tuple(nodes.values()), frozenset(edges))


def _compound_components(raw: RawPathway, kind: dict[str, str]) -> list[set[str]]:
    compounds = [n.node_id for n in raw.nodes if n.kind == "compound"]
    parent = {c: c for c in compounds}

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for e in raw.edges:
        a, b = tuple(e)
        if kind[a] == "compound" and kind[b] == "compound":
            ra, rb = find(a), find(b)
            if ra != rb:
                parent[max(ra, rb)] = min(ra, rb)
    groups: dict[str, set[str]] = {}
    for c in compounds:
        groups.setdefault(find(c), set()).add(c)
    return list(groups.values())


def preprocess(raw: RawPathway) -> PathwayGraph:
    """Reduce a raw pathway to its gene graph.

    Gene nodes are merged by symbol. Every pair of genes touching the same
    connected group of compound nodes is joined by an edge, so a chain
    ``gene - compound - ... - compound - gene`` becomes a direct edge.
    Map, ortholog and other nodes are dropped together with their edges.
    """
    kind = {n.node_id: n.kind for n in raw.nodes}
    symbol = {n.node_id: n.name for n in raw.nodes if n.kind == "gene"}
    genes = set(symbol.values())
    if not genes:
        raise EmptyPathwayError(f"pathway {raw.id!r} has no gene nodes")

    gene_edges = set()
    compound_genes: dict[str, set[str]] = {}
    for e in raw.edges:
        a, b = tuple(e)
        ka, kb = kind[a], kind[b]
        if ka == "gene" and kb == "gene":
            gene_edges.add((symbol[a], symbol[b]))
        elif ka == "compound" and kb == "gene":
            compound_genes.setdefault(a, set()).add(symbol[b])
        elif kb == "compound" and ka == "gene":
            compound_genes.setdefault(b, set()).add(symbol[a])

    for component in _compound_components(raw, kind):
        touched = sorted(set().union(*(compound_genes.get(c, set()) for c in component)))
        for i, g1 in enumerate(touched):
            for g2 in touched[i + 1:]:
                gene_edges.add((g1, g2))

    return PathwayGraph.from_edges(raw.id, genes, gene_edges)


def read_pathway(path) -> PathwayGraph:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except (OSError, UnicodeDecodeError) as exc:
        raise PathwayParseError(f"cannot read pathway file: {exc}", source=str(path)) from exc
    return preprocess(parse_pathway_file(text, path.stem, source=str(path)))


def load_pathway_set(directory) -> list[PathwayGraph]:
    """Load every ``*.pathway`` / ``*.txt`` file in ``directory``, sorted by id.

    Pathways with no genes are skipped with a warning.
    """
    directory = Path(directory)
    files = sorted(
        (p for p in directory.iterdir() if p.is_file() and p.suffix in PATHWAY_SUFFIXES),
        key=lambda p: p.stem,
    )
    graphs = []
    for path in files:
        try:
            graphs.append(read_pathway(path))
        except EmptyPathwayError:
            logger.warning("skipping %s: no genes after preprocessing", path.name)
    return graphs


def format_pathway(graph: PathwayGraph) -> str:
    """Serialise a gene graph back into the pathway text format."""
    lines = [f"# pathway {graph.id}: {graph.n_genes} genes, {len(graph.edges())} edges"]
    lines += [f"node g{i} gene {g}" for i, g in enumerate(graph.genes)]
    lines += [f"edge g{a} g{b}" for a, b in graph.edges()]
    return "\n".join(lines) + "\n"


def write_pathway(graph: PathwayGraph, path) -> None:
    Path(path).write_text(format_pathway(graph), encoding="utf-8")
