"""Exception types shared across the pipeline."""


class ParseError(ValueError):
    """A test-case line is outside the supported assert-equality grammar."""


class RenderError(ValueError):
    """A case cannot be rendered, e.g. its expected value is still pending."""


class DomainError(ValueError):
    """An operation was called outside its numeric domain."""


class TemplateError(ValueError):
    """A prompt template could not be instantiated."""


class NoCodeFound(ValueError):
    """No code block or function definition could be extracted from a response."""


class EmptyMutation(RuntimeError):
    """The model returned blank output, or echoed the source text unchanged."""


class EmptyText(ValueError):
    """An embedding was requested for empty or whitespace-only text."""


class ProviderError(RuntimeError):
    """Base class for chat/embedding provider failures."""


class AuthError(ProviderError):
    """The provider rejected the configured credential."""


class RateLimited(ProviderError):
    """The provider throttled the request past the retry budget."""


class ReplayMiss(ProviderError):
    """Replay mode got a request whose digest has no recorded response."""

    def __init__(self, digest: str):
        super().__init__(f"no recorded response for request digest {digest}")
        self.digest = digest


class SandboxError(RuntimeError):
    """The execution backend failed for infrastructure reasons.

    Distinct from a test failing or erroring inside the sandbox.
    """


class SchemaError(ValueError):
    """A dataset record does not map onto a valid task."""


class ConfigError(ValueError):
    """Run configuration is invalid; carries field-level messages."""

    def __init__(self, *messages: str):
        super().__init__("; ".join(messages))
        self.messages = list(messages)


class MissingMetric(ValueError):
    """A report layout needs a metric series the ledger does not contain."""
