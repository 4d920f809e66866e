"""Compactly supported tight frames on graphs built from partition trees."""

__version__ = "0.1.0"

from .errors import (ConfigurationError, ConnectivityError, FrameError, InputError,
                     NumericalError, ParseError, VerificationError)
from .graph import (Graph, LaplacianSpectrum, SpanningTreeFamily, induced_subgraph,
                    is_connected, laplacian, minimum_spanning_tree, spanning_tree_family,
                    spectrum)
from .partition import (ClusterNode, PartitionTree, build_partition_tree, coarsen_graph,
                        load_tree, save_tree, subgraph_of, validate_partition_tree)
from .filterbanks import (FilterPair, eigen_filterbank, haar_filterbank, make_filterbanks,
                          tree_filterbank, verify_uep)
from .frame import FrameAtoms, build_frame, dec, export_frame, import_frame, verify_tight
from .transforms import (CoefficientTree, analyze, analyze_dense, synthesize,
                         synthesize_dense)
from .bench import gen_signal, nl_approx, run_benchmark
