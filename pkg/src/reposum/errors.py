"""Exception hierarchy shared across the toolchain."""


class ReposumError(Exception):
    """Base class for all toolchain errors."""


# repository analysis
class RootNotFound(ReposumError):
    pass


class NoSourceFiles(ReposumError):
    pass


class EmptyModel(ReposumError):
    pass


# matrices and clustering
class SizeMismatch(ReposumError):
    pass


class DimensionMismatch(ReposumError):
    pass


class UnknownLabel(ReposumError):
    pass


# model access
class GatewayError(ReposumError):
    pass


class AuthError(GatewayError):
    pass


class RateLimited(GatewayError):
    pass


class MalformedResponse(GatewayError):
    pass


class EmbedderError(ReposumError):
    pass


# docs / eval
class MissingFeature(ReposumError):
    pass


class ZeroDenominator(ReposumError):
    pass


class LengthMismatch(ReposumError):
    pass


class UnresolvableCommit(ReposumError):
    pass


# pipeline
class ConfigError(ReposumError):
    pass


class SchemaViolation(ReposumError):
    def __init__(self, problems):
        self.problems = list(problems)
        super().__init__("; ".join(self.problems) or "schema violation")


class DependencyError(ReposumError):
    pass
