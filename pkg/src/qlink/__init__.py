"""qlink: a runtime for tightly coupled quantum control, decoding and host devices."""

__version__ = "0.1.0"

from .device import Capability, DevicePtr, Registry  # noqa: E402
from .driver import Driver  # noqa: E402
from .errors import QlinkError  # noqa: E402

__all__ = ["Capability", "DevicePtr", "Driver", "QlinkError", "Registry", "__version__"]
