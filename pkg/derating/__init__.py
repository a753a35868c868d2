"""Flip-flop functional derating predicted from circuit graph embeddings.

A gate-level netlist becomes a weighted circuit graph (written as GML), nodes
get node2vec embeddings, a fault injection campaign measures the Functional
Derating of every flip-flop, and two regressors (an RBF epsilon-SVR and a
dense network) learn to predict derating from the embeddings.

Run ``python -m derating --help`` for the command line.
"""
