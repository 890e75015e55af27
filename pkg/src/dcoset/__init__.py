"""Double coset decompositions G1\\G/G2 of reductive matrix groups: gradient maps,
slices, Cartan subsets and per-point orbit classification."""
from .cartanset import classify_cartan_sets, fundamental_cartan, normalize_to_cartan, weyl_group
from .gradmap import flow_to_closed, isotropy_and_slice, phi
from .liegroup import GroupPoint, Scenario, cartan_factor, random_point, scenario_from_json
from .orbitreport import ClassifyParams, OrbitReport, classify, proper_region_probe
from .presets import preset

__version__ = "0.1.0"

__all__ = ["ClassifyParams", "GroupPoint", "OrbitReport", "Scenario", "cartan_factor",
           "classify", "classify_cartan_sets", "flow_to_closed", "fundamental_cartan",
           "isotropy_and_slice", "normalize_to_cartan", "phi", "preset", "proper_region_probe",
           "random_point", "scenario_from_json", "weyl_group"]
