"""Pathway-based patient stratification with smoothed shortest path graph kernels."""
from .clustering import ClusterAssignment, kernel_kmeans, kernel_silhouette
from .cohort import MutationCatalog, SurvivalTable, label_matrix, load_clinical, load_mutations
from .graph import ShortestPath, ShortestPathSet, all_shortest_paths, diameter
from .kernel import KernelMatrix, check_psd, combine_kernels, cosine_normalize, pathway_kernel
from .pathway_io import PathwayGraph, load_pathway_set, parse_pathway_file, preprocess
from .pipeline import Cohort, PipelineConfig, finalize, screen_pathways, sweep
from .smoothing import SmoothingConfig, smooth_direct, smooth_iterative
from .survival import chi_square_upper_tail, kaplan_meier, logrank_test
from .synthetic import SyntheticSpec, benchmark_pathway, clustering_accuracy, generate_cohort, run_simulation_grid

__version__ = "0.1.0"
