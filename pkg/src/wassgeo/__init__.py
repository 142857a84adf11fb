"""Principal geodesic analysis for discrete measures in Wasserstein space."""

__version__ = "0.1.0"

from .measures import (
    DiscreteMeasure,
    cost_matrix,
    load_measure_csv,
    mean_point,
    save_measure_csv,
    weighted_inner,
    weighted_norm,
)
from .transport import (
    BarycentricMap,
    NumericalError,
    TransportPlan,
    barycentric_projection,
    exact_transport,
    sinkhorn,
    w2_squared,
)
from .barycenter import (
    barycenter_fixed_support,
    barycenter_free_support,
    barycenter_multimarginal_exact,
)
from .geodesics import (
    GeneralizedGeodesic,
    grad_omega,
    mccann_interpolant,
    omega,
    sample_geodesic,
)
from .principal import (
    PrincipalComponentSet,
    SolverConfig,
    distance_to_geodesic,
    euclidean_pca_means,
    fit,
    majorization_value,
    mm_gradients,
    optimal_map_projection,
    orthogonality_projection,
)
from .ingest import image_to_measure, quantize_colors
from .render import (
    measure_to_raster,
    render_palette_strip,
    render_scatter_svg,
)

__all__ = [
    "BarycentricMap",
    "DiscreteMeasure",
    "GeneralizedGeodesic",
    "NumericalError",
    "PrincipalComponentSet",
    "SolverConfig",
    "TransportPlan",
    "barycenter_fixed_support",
    "barycenter_free_support",
    "barycenter_multimarginal_exact",
    "barycentric_projection",
    "cost_matrix",
    "distance_to_geodesic",
    "euclidean_pca_means",
    "exact_transport",
    "fit",
    "grad_omega",
    "image_to_measure",
    "load_measure_csv",
    "majorization_value",
    "mccann_interpolant",
    "mean_point",
    "measure_to_raster",
    "mm_gradients",
    "omega",
    "optimal_map_projection",
    "orthogonality_projection",
    "quantize_colors",
    "render_palette_strip",
    "render_scatter_svg",
    "sample_geodesic",
    "save_measure_csv",
    "sinkhorn",
    "w2_squared",
    "weighted_inner",
    "weighted_norm",
]
