"""Communication-free data-parallel GNN training on vertex-cut partitions."""

__version__ = "0.1.0"
