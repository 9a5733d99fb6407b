"""Shadow-robust road-region recognition.

Four phases run per frame: color-similarity candidate extraction, shadow
detection and compensation, linear SVM pixel classification, and binary
morphology post-processing. Rates against ground truth are computed by
:mod:`shadowroad.metrics`.
"""

__version__ = "0.1.0"
