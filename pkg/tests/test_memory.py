import pytest

from incocsim.memory import (
    AddressOutOfRange,
    MemoryModel,
    MemoryType,
    OutOfMemory,
    ResidentLinesExist,
)


def test_default_type_is_normal():
    mem = MemoryModel(memory_size=1 << 20)
    assert mem.resolve_type(0) is MemoryType.NORMAL_CACHEABLE
    assert mem.resolve_type(0xFFFFF) is MemoryType.NORMAL_CACHEABLE


def test_allocate_rounds_to_pages_and_types_pages():
    mem = MemoryModel(memory_size=1 << 20, page_size=4096)
    r = mem.allocate_region(100, MemoryType.INC_OC)
    assert r.length == 4096
    assert mem.resolve_type(r.base) is MemoryType.INC_OC
    assert mem.resolve_type(r.base + 4095) is MemoryType.INC_OC
    assert mem.resolve_type(r.base + 4096) is MemoryType.NORMAL_CACHEABLE


def test_allocations_never_overlap():
    mem = MemoryModel(memory_size=1 << 20)
    spans = [mem.allocate_region(5000, MemoryType.NORMAL_CACHEABLE)
             for _ in range(8)]
    for a in spans:
        for b in spans:
            if a is not b:
                assert a.base + a.length <= b.base or b.base + b.length <= a.base


def test_out_of_memory():
    mem = MemoryModel(memory_size=8192)
    mem.allocate_region(8192, MemoryType.NORMAL_CACHEABLE)
    with pytest.raises(OutOfMemory):
        mem.allocate_region(1, MemoryType.NORMAL_CACHEABLE)


def test_declare_region_overlap_rejected():
    mem = MemoryModel(memory_size=1 << 20)
    mem.declare_region(0x4000, 0x2000, MemoryType.INC_OC)
    with pytest.raises(ValueError):
        mem.declare_region(0x5000, 0x1000, MemoryType.NORMAL_CACHEABLE)


def test_resolve_out_of_range():
    mem = MemoryModel(memory_size=1 << 16)
    with pytest.raises(AddressOutOfRange):
        mem.resolve_type(1 << 16)
    with pytest.raises(AddressOutOfRange):
        mem.resolve_type(-1)


def test_retype_blocked_while_resident():
    mem = MemoryModel(memory_size=1 << 20)
    r = mem.allocate_region(4096, MemoryType.NORMAL_CACHEABLE)
    with pytest.raises(ResidentLinesExist):
        mem.set_region_type(r, MemoryType.INC_OC,
                            residency_probe=lambda base, length: True)
    r2 = mem.set_region_type(r, MemoryType.INC_OC,
                             residency_probe=lambda base, length: False)
    assert mem.resolve_type(r2.base) is MemoryType.INC_OC


def test_page_size_must_be_power_of_two():
    with pytest.raises(ValueError):
        MemoryModel(page_size=3000)
