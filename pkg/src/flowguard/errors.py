"""Exception hierarchy.

Every error carries an ``exit_code`` so the CLI can map failures onto its
documented exit statuses (2 usage/config, 3 training failure, 4 data integrity).
"""


class FlowguardError(Exception):
    exit_code = 2


class ConfigError(FlowguardError, ValueError):
    exit_code = 2


class DataError(FlowguardError, ValueError):
    exit_code = 4


class TrainingError(FlowguardError, RuntimeError):
    exit_code = 3


# flow_model
class UnknownLabel(DataError):
    pass


class MissingLabelColumn(DataError):
    pass


class EmptyDataset(DataError):
    pass


class SchemaMismatch(DataError):
    pass


# preprocess
class LengthMismatch(ConfigError):
    pass


class BadBins(ConfigError):
    pass


class BadK(ConfigError):
    pass


class PlanNotFit(ConfigError):
    pass


class MissingColumn(ConfigError):
    pass


class ClassTooSmall(DataError):
    pass


class BadFractions(ConfigError):
    pass


# models
class EmptyData(TrainingError):
    pass


class BadHyperparameter(ConfigError):
    pass


class NonFiniteLoss(TrainingError):
    pass


class DimensionMismatch(ConfigError):
    pass


class FormatVersionError(ConfigError):
    pass


# ensemble
class BadDistribution(ConfigError):
    pass


class BadWeights(ConfigError):
    pass


class BadStep(ConfigError):
    pass


# explain
class EmptyBackground(ConfigError):
    pass


class TooManyFeatures(ConfigError):
    pass


# evalmetrics
class BadCode(ConfigError):
    pass


# sentinel
class TimeRegression(DataError):
    def __init__(self, message, line=None):
        super().__init__(message)
        self.line = line


# synth
class BadSpec(ConfigError):
    pass
