"""Default parameters of the analysis."""

# Hidden Markov model for genotype probabilities
HMM_CONFIG = {
    "error_rate": 0.002,
    "map_function": "carter_falconer",
    "step": 0.5,
}

# Single-trait genome scans
SCAN_CONFIG = {
    "lod_min": 5.0,
    "min_individuals": 10,
    "null_includes_interactive": False,
}

# trans-eQTL hotspot definition
HOTSPOT_CONFIG = {
    "lod_min": 10.0,
    "window": 10.0,
    "local_exclusion": 10.0,
    "count_min": 50,
    "pad": 5.0,
}

# One-vs-two QTL multivariate test
DISSECTION_CONFIG = {
    "top_k": 50,
    "mode": "coordinate",
    "starts": 5,
    "max_iterations": 20,
    "exclude_same_chr": True,
}

# Null distribution of LOD_2v1
SIGNIFICANCE_CONFIG = {
    "method": "bootstrap",
    "n_reps": 1000,
    "plus_one": False,
    "permute_covariates": False,
}

# Recombinant vs non-recombinant discriminant diagnostic
LDA_CONFIG = {
    "top_k": 100,
    "ridge": 0.0,
    "min_class_size": 3,
}

# Power study
POWER_CONFIG = {
    "n_ind": 500,
    "n_markers": 100,
    "chr_length": 100.0,
    "left_position": 50.0,
    "n_reps": 100,
    "null_reps": 1000,
    "alpha": 0.05,
    "grid_step": 2.0,
}
