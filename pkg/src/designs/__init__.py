# src/designs/__init__.py
from src.designs.baselines import (BaselineConfig, FixedSampleDesign, StandardTadDesign, StandardTadSieDesign,
                                   TadStandardTestDesign)
from src.designs.tad import TadConfig, TadSieDesign

# design name -> (design class, config class)
DESIGNS = {
    "tad_sie": (TadSieDesign, TadConfig),
    "fixed": (FixedSampleDesign, BaselineConfig),
    "standard_tad": (StandardTadDesign, BaselineConfig),
    "standard_tad_sie": (StandardTadSieDesign, BaselineConfig),
    "tad_standard_test": (TadStandardTestDesign, TadConfig),
}
