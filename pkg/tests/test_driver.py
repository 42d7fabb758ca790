import hashlib
import json
import os
import threading
import time

import pytest

from qlink import marshal
from qlink.device import Capability, Device
from qlink.devices import DecoderDevice, EchoDevice, build_device, load_config
from qlink.driver import Driver
from qlink.errors import (AllocationError, CallbackError, CapabilityError, CompileError, DeviceDisconnectedError,
                          DriverStateError, InitializationError, KernelError, MarshalError, ParameterError,
                          TransportError)
from qlink.kernel import CollectiveExecutor, CompiledKernel, QControlProgram
from qlink.vppu import assemble

from reference_device import ReferenceVppu


class QuantumOnly(Device):
    capabilities = Capability.QUANTUM_CONTROL

    def upload_program(self, binary):
        pass

    def trigger(self, args, tick):
        return None


class FailsToConnect(Device):
    capabilities = Capability.DATA_MARSHALING

    def on_connect(self):
        raise OSError("link down")


class Recorder(Device):
    """Callback device that records when each callback body finishes."""

    capabilities = Capability.DATA_MARSHALING | Capability.DEVICE_CALLBACK

    def __init__(self):
        self.seen = []
        self.finished = []

    def callbacks(self):
        return {"look": (self._look, 1), "mutate": (self._mutate, 0)}

    def _look(self, *bufs):
        self.seen.append([bytes(b) for b in bufs])
        time.sleep(0.001)
        self.finished.append(time.perf_counter_ns())
        return b"\x01"

    def _mutate(self, buf):
        buf[0] = 0xFF  # read-only view: raises


# -- initialization ----------------------------------------------------------

def test_initialize_empty_is_host_only():
    drv = Driver().initialize([])
    assert drv.device_count == 0
    assert drv.host_uid == 0
    assert drv.registry.record(0).capabilities == Capability.DATA_MARSHALING | Capability.DEVICE_CALLBACK
    drv.shutdown()


def test_initialize_two_devices(driver):
    assert driver.device_count == 2
    assert all(rec.connected for rec in driver.registry)


def test_double_initialize(driver):
    with pytest.raises(DriverStateError):
        driver.initialize([])


def test_failing_device_is_named():
    with pytest.raises(InitializationError) as info:
        Driver().initialize([("flaky", FailsToConnect())])
    assert "flaky" in str(info.value)


def test_uninitialized_driver_refuses():
    with pytest.raises(DriverStateError):
        Driver().malloc(4)


def test_config_file(tmp_path, monkeypatch):
    cfg = {"devices": [{"name": "v", "kind": "vppu", "params": {"seed": 3}}, {"name": "d", "kind": "decoder"}]}
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(cfg))
    monkeypatch.setenv("QLINK_CONFIG", str(path))
    drv = Driver().initialize(load_config())
    assert drv.device("v").seed == 3
    drv.shutdown()


def test_config_errors_name_the_field():
    with pytest.raises(ParameterError) as info:
        build_device({"name": "x"})
    assert info.value.field == "kind"
    with pytest.raises(ParameterError) as info:
        build_device({"name": "x", "kind": "vppu", "params": {"bogus": 1}})
    assert "bogus" in info.value.field
    with pytest.raises(ParameterError):
        build_device({"name": "x", "kind": "toaster"})


# -- memory ------------------------------------------------------------------

def test_malloc_defaults_to_host(driver):
    ptr = driver.malloc(32)
    assert ptr.device == driver.host_uid and ptr.size_bytes == 32
    assert driver.read(ptr) == bytes(32)
    with pytest.raises(AllocationError):
        driver.malloc(0)


def test_malloc_on_quantum_only_device():
    drv = Driver().initialize([("q", QuantumOnly())])
    with pytest.raises(CapabilityError):
        drv.malloc(8, "q")
    drv.shutdown()


def test_memcpy_roundtrip_and_bounds(driver):
    dev = driver.malloc(4, "decoder")
    driver.memcpy(dev, bytes([1, 2, 3, 4]), 4)
    out = bytearray(4)
    driver.memcpy(out, dev, 4)
    assert list(out) == [1, 2, 3, 4]
    small = driver.malloc(32)
    with pytest.raises(AllocationError):
        driver.memcpy(small, bytes(64), 33)


def test_relay_between_devices(driver):
    payload = os.urandom(1024)
    a = driver.malloc(1024, "decoder")
    b = driver.malloc(1024, "host")
    c = driver.malloc(1024, "decoder")
    driver.memcpy(a, payload, 1024)
    driver.memcpy(b, a, 1024)
    driver.memcpy(c, b, 1024)
    assert hashlib.sha256(driver.read(c)).digest() == hashlib.sha256(payload).digest()


def test_free_then_use(driver):
    p = driver.malloc(8)
    driver.free(p)
    with pytest.raises(AllocationError):
        driver.free(p)
    with pytest.raises(AllocationError):
        driver.memcpy(bytearray(8), p, 8)


# -- kernels -----------------------------------------------------------------

def test_load_kernel_targets_vppu(driver):
    handle = driver.load_kernel(".kernel k\nLOADI r0, 7\nHALT\n")
    kernel = driver.kernel(handle)
    assert kernel.kernel_name == "k"
    assert [p.target for p in kernel.programs] == [driver.uid("vppu0")]


def test_load_kernel_errors(driver):
    with pytest.raises(CompileError):
        driver.load_kernel("")
    with pytest.raises(CompileError):
        driver.load_kernel(".target #99\nHALT\n")
    with pytest.raises(CompileError):
        driver.load_kernel(".target #2\nHALT\n")  # decoder lacks quantum_control
    with pytest.raises(CompileError):
        driver.load_kernel("FROB r1\n")
    with pytest.raises(CompileError):
        driver.load_kernel(b"")


def test_precompiled_binary(driver):
    handle = driver.load_kernel(assemble("LOADI r0, 42\nHALT"), result_size=1)
    res = driver.malloc(1)
    driver.launch_kernel(handle, [], res)
    assert driver.read(res) == b"\x2a"


def test_launch_result_and_args(driver):
    handle = driver.load_kernel(".result 8\nXORR r0, r1, r2\nHALT\n")
    a, b = driver.malloc(8), driver.malloc(8)
    driver.memcpy(a, marshal.encode("u64", 0xF0F0), 8)
    driver.memcpy(b, marshal.encode("u64", 0x0FF0), 8)
    res = driver.malloc(8)
    out = driver.launch_kernel(handle, [a, b], res)
    assert marshal.decode("u64", driver.read(res)) == 0xFF00 == out.result


def test_result_size_mismatch(driver):
    handle = driver.load_kernel(".result 1\nLOADI r0, 1\nHALT\n")
    with pytest.raises(AllocationError):
        driver.launch_kernel(handle, [], driver.malloc(2))


def test_disconnected_target_is_named(driver):
    handle = driver.load_kernel("HALT\n")
    driver.registry.disconnect(driver.uid("vppu0"))
    with pytest.raises(KernelError) as info:
        driver.launch_kernel(handle)
    assert "vppu0" in str(info.value)


def test_program_fault_names_device_and_pc(driver):
    handle = driver.load_kernel("NOP\nRECVCB r1\nHALT\n")
    with pytest.raises(KernelError) as info:
        driver.launch_kernel(handle)
    assert "vppu0" in str(info.value) and info.value.pc == 1


def test_upload_is_all_or_nothing():
    class Refuses(ReferenceVppu):
        def upload_program(self, binary):
            raise OSError("flash write failed")

    good, bad = ReferenceVppu(), Refuses()
    drv = Driver().initialize([("good", good), ("bad", bad)])
    kernel = CompiledKernel("two", (QControlProgram(1, assemble("HALT")), QControlProgram(2, assemble("HALT"))))
    with pytest.raises(KernelError) as info:
        CollectiveExecutor().launch(drv.registry, kernel, [])
    assert "bad" in str(info.value)
    assert good.binary is None and good.triggers == 0 and bad.triggers == 0
    drv.shutdown()


def test_collective_trigger_common_tick():
    a, b = ReferenceVppu(), ReferenceVppu()
    drv = Driver().initialize([("a", a), ("b", b)])
    handle = drv.load_kernel(".target a\nDELAY 5\nHALT\n.target b\nDELAY 50\nHALT\n")
    out = drv.launch_kernel(handle)
    assert a.last_state.trigger_tick == b.last_state.trigger_tick == out.trigger_tick
    out2 = drv.launch_kernel(handle)
    assert out2.trigger_tick > out.trigger_tick + 50
    drv.shutdown()


def test_substituted_device_is_launched_identically():
    drv = Driver().initialize([("ref", ReferenceVppu())])
    handle = drv.load_kernel(".result 1\nLOADI r0, 9\nHALT\n")
    res = drv.malloc(1)
    drv.launch_kernel(handle, [], res)
    assert drv.read(res) == b"\x09"
    drv.shutdown()


# -- device_call -------------------------------------------------------------

def test_device_call_add(driver):
    assert driver.device_call("decoder", "add", [("i32", 2), ("i32", 3)], "i32") == 5


def test_device_call_bits_packing():
    rec = Recorder()
    drv = Driver().initialize([("rec", rec)])
    drv.device_call("rec", "look", [("bits", [1, 0, 1, 1])])
    (arg,) = rec.seen[-1]
    assert arg[4] == 0b00001101
    drv.shutdown()


def test_device_call_errors(driver):
    with pytest.raises(CallbackError):
        driver.device_call("decoder", "nope", [])
    with pytest.raises(MarshalError):
        driver.device_call("decoder", "add", [("i32", "two"), ("i32", 3)])
    with pytest.raises(CallbackError) as info:
        driver.device_call("decoder", "add", [("i32", 2**31 - 1), ("i32", 1)], "i32")
    assert "add" in str(info.value)


def test_device_call_is_synchronous():
    rec = Recorder()
    drv = Driver().initialize([("rec", rec)])
    for _ in range(20):
        drv.device_call("rec", "look", [("u8", 1)], "u8")
        resumed = time.perf_counter_ns()
        assert rec.finished[-1] <= resumed
    drv.shutdown()


def test_arguments_are_immutable():
    rec = Recorder()
    drv = Driver().initialize([("rec", rec)])
    ptr = drv.malloc(4)
    drv.memcpy(ptr, b"\x01\x02\x03\x04", 4)
    before = hashlib.sha256(drv.read(ptr)).hexdigest()
    with pytest.raises(CallbackError):
        drv.registry.invoke_callback(drv.uid("rec"), "mutate", [ptr])
    drv.registry.invoke_callback(drv.uid("rec"), "look", [ptr], drv.malloc(1))
    assert hashlib.sha256(drv.read(ptr)).hexdigest() == before
    drv.shutdown()


def test_device_calls_from_threads_are_serialized(driver):
    results = []

    def work(i):
        results.append(driver.device_call("decoder", "add", [("i32", i), ("i32", i)], "i32"))

    threads = [threading.Thread(target=work, args=(i,)) for i in range(50)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    assert sorted(results) == [2 * i for i in range(50)]


# -- latency and rdma ----------------------------------------------------------

def test_roundtrip_latency_inproc_echo():
    drv = Driver().initialize([{"name": "echo", "kind": "echo"}])
    samples = drv.measure_roundtrip_latency("echo", 1000, 32)
    assert len(samples) == 1000 and all(s > 0 for s in samples)
    drv.shutdown()


def test_roundtrip_latency_callback_path(driver):
    samples = driver.measure_roundtrip_latency("host", 50, 16)
    assert len(samples) == 50 and all(s >= 0 for s in samples)


def test_roundtrip_latency_errors(driver):
    with pytest.raises(ParameterError):
        driver.measure_roundtrip_latency("host", 0)
    with pytest.raises(TransportError):
        driver.measure_roundtrip_latency("decoder", 10)


def test_rdma_descriptor_handshake():
    drv = Driver().initialize([{"name": "echo", "kind": "echo"}])
    (desc,) = drv.rdma_buffer_descriptors("echo")
    assert desc["size"] == 32
    with pytest.raises(CapabilityError):
        drv.rdma_buffer_descriptors("host")
    drv.shutdown()


def test_decoder_device_paths_agree():
    dec = DecoderDevice()
    packed = [0b10, 0b00, 0b01]
    for v in packed:
        dec._enqueue_packed(marshal.encode("u64", v))
    a = dec._decode()
    for k, v in enumerate(packed):
        dec._enqueue_bits(marshal.encode("bits", [v >> 1, v & 1]), marshal.encode("u64", k))
    b = dec._decode()
    assert a == b and dec.verdicts[0].correction_mask == dec.verdicts[1].correction_mask


def test_echo_device_stops_service():
    dev = EchoDevice()
    drv = Driver().initialize([("e", dev)])
    assert dev.service is not None
    drv.shutdown()
    assert dev.service is None
    with pytest.raises(DeviceDisconnectedError):
        drv.registry.malloc(drv.uid("host"), 1)
