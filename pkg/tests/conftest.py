import pytest

from navex.graphs import Graph


@pytest.fixture(scope="session")
def class_hierarchy() -> Graph:
    """A small class-structure tree: subclass edges between classes, method
    edges from classes to the methods they define."""
    edges = [
        ("Object", "method", "toString()"),
        ("Object", "subclass", "AbstractList"),
        ("AbstractList", "method", "size()"),
        ("AbstractList", "subclass", "ArrayList"),
        ("AbstractList", "subclass", "LinkedList"),
        ("LinkedList", "method", "addFront(element)"),
    ]
    nodes = {s for s, _, _ in edges} | {t for _, _, t in edges}
    return Graph.build(nodes, {"subclass", "method"}, edges)
