"""Exception hierarchy shared by every qlink subsystem."""


class QlinkError(Exception):
    """Base class for all runtime errors raised by qlink."""


class RegistrationError(QlinkError):
    pass


class UnknownDeviceError(QlinkError):
    pass


class CapabilityError(QlinkError):
    pass


class DeviceDisconnectedError(QlinkError):
    pass


class AllocationError(QlinkError):
    """Bad size, stale or double-freed handle, or out-of-bounds copy."""


class MarshalError(QlinkError):
    pass


class CallbackError(QlinkError):
    """Unknown callback, duplicate registration, or a fault raised by the callee."""


class DriverStateError(QlinkError):
    pass


class InitializationError(QlinkError):
    def __init__(self, device_name, reason):
        super().__init__(f"device {device_name!r} failed to connect: {reason}")
        self.device_name = device_name


class CompileError(QlinkError):
    pass


class KernelError(QlinkError):
    pass


class ProgramFault(KernelError):
    """A quantum-control device stopped abnormally while running a program."""

    def __init__(self, reason, pc=None, device=None):
        self.reason = reason
        self.pc = pc
        self.device = device
        super().__init__(self._describe())

    def _describe(self):
        where = []
        if self.device is not None:
            where.append(f"device {self.device}")
        if self.pc is not None:
            where.append(f"pc {self.pc}")
        prefix = f"[{', '.join(where)}] " if where else ""
        return f"{prefix}{self.reason}"

    def on_device(self, device):
        return ProgramFault(self.reason, pc=self.pc, device=device)


class AssemblyError(QlinkError):
    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class DecodeError(QlinkError):
    """Raised when a binary program does not decode under the VPPU ISA."""


class FrameError(QlinkError):
    def __init__(self, reason):
        super().__init__(reason)
        self.reason = reason


class TransportError(QlinkError):
    pass


class EndpointInUseError(TransportError):
    pass


class ScheduleError(QlinkError):
    pass


class ParameterError(QlinkError, ValueError):
    """Invalid model parameter; ``field`` names the offending entry."""

    def __init__(self, field, message):
        super().__init__(f"{field}: {message}")
        self.field = field
