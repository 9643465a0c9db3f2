"""Network generators: cortical microcircuit, Sudoku WTA, random test nets."""
