"""Social-signal time series from body pose and faces, feature engines and
satisfaction classification under leave-one-out cross-validation."""

__version__ = "0.1.0"
