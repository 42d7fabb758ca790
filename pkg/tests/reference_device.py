"""A quantum-control device backed by the reference interpreter in ``oracles``."""
from qlink.device import Capability, Device
from qlink.vppu.backend import RepetitionBackend

from oracles import RefFault, ref_run


class ReferenceVppu(Device):
    capabilities = Capability.QUANTUM_CONTROL
    single_threaded = True

    def __init__(self, seed: int = 0):
        self.backend = RepetitionBackend(seed=seed)
        self.seed = seed
        self.bridge = None
        self.binary = None
        self.last_state = None
        self.triggers = 0
        self._now = 0

    def upload_program(self, binary):
        self.binary = bytes(binary)

    def discard_program(self):
        self.binary = None

    def trigger(self, args, trigger_tick):
        self.triggers += 1
        regs = [0] * 16
        for i, a in enumerate(args):
            regs[1 + i] = int.from_bytes(bytes(a), "little")
        self.backend.reset(self.seed)
        try:
            st = ref_run(self.binary, self.backend, self.bridge, regs=regs)
        except RefFault as exc:
            from qlink.errors import ProgramFault
            raise ProgramFault(str(exc)) from exc
        st.trigger_tick = trigger_tick
        self._now = trigger_tick + st.dtd_clock
        self.last_state = st
        return st

    def dtd_now(self):
        return self._now
