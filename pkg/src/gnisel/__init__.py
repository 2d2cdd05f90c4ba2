"""Graph model selection with graphical neighbour information."""
