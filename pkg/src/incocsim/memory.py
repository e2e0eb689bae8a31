"""Flat physical address space with page-granularity memory-type attributes.

Memory types decide where data may be cached: NORMAL_CACHEABLE everywhere,
UNCACHEABLE nowhere, INC_OC (inner-non-cacheable, outer-cacheable) only in
the shared L2.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field


class MemoryError_(Exception):
    """Base error for the memory model."""


class OutOfMemory(MemoryError_):
    pass


class AddressOutOfRange(MemoryError_):
    pass


class ResidentLinesExist(MemoryError_):
    """A region cannot change memory type while any of its lines is cached."""


class MemoryType(enum.Enum):
    NORMAL_CACHEABLE = "normal"
    UNCACHEABLE = "uncacheable"
    INC_OC = "incoc"

    @classmethod
    def from_name(cls, name: str) -> "MemoryType":
        for mt in cls:
            if mt.value == name:
                return mt
        raise ValueError(f"unknown memory type {name!r}")


@dataclass(frozen=True)
class RegionHandle:
    base: int
    length: int
    mem_type: MemoryType


@dataclass
class PageAttributeMap:
    page_size: int = 4096
    default_type: MemoryType = MemoryType.NORMAL_CACHEABLE
    entries: dict[int, MemoryType] = field(default_factory=dict)

    def lookup(self, address: int) -> MemoryType:
        return self.entries.get(address // self.page_size, self.default_type)

    def set_pages(self, base: int, length: int, mem_type: MemoryType) -> None:
        assert base % self.page_size == 0 and length % self.page_size == 0
        first = base // self.page_size
        for page in range(first, first + length // self.page_size):
            if mem_type is self.default_type:
                self.entries.pop(page, None)
            else:
                self.entries[page] = mem_type


class MemoryModel:
    """Owns the address space, region table and the allocation API.

    Stands in for an mmap-style allocator with a cacheability flag; there is
    no virtual memory, pages are keyed directly by physical page index.
    """

    def __init__(self, memory_size: int = 4 << 30, page_size: int = 4096):
        if page_size <= 0 or page_size & (page_size - 1):
            raise ValueError("page_size must be a power of two")
        if memory_size % page_size:
            raise ValueError("memory_size must be a multiple of page_size")
        self.memory_size = memory_size
        self.page_size = page_size
        self.attr_map = PageAttributeMap(page_size=page_size)
        self.regions: list[RegionHandle] = []
        self._next_free = 0  # bump allocator, regions never overlap

    def _round_up(self, length: int) -> int:
        return -(-length // self.page_size) * self.page_size

    def allocate_region(self, length: int, mem_type: MemoryType) -> RegionHandle:
        if length <= 0:
            raise ValueError("length must be positive")
        length = self._round_up(length)
        base = self._next_free
        if base + length > self.memory_size:
            raise OutOfMemory(
                f"cannot allocate {length:#x} bytes at {base:#x} "
                f"(memory size {self.memory_size:#x})"
            )
        self._next_free = base + length
        return self._install(base, length, mem_type)

    def declare_region(self, base: int, length: int, mem_type: MemoryType) -> RegionHandle:
        """Install a region at a fixed base, as declared by a trace header."""
        if base % self.page_size or length % self.page_size or length <= 0:
            raise ValueError("region base and length must be page aligned and positive")
        if base + length > self.memory_size:
            raise AddressOutOfRange(f"region end {base + length:#x} exceeds memory size")
        for r in self.regions:
            if base < r.base + r.length and r.base < base + length:
                raise ValueError(
                    f"region {base:#x}+{length:#x} overlaps existing {r.base:#x}+{r.length:#x}"
                )
        self._next_free = max(self._next_free, base + length)
        return self._install(base, length, mem_type)

    def _install(self, base: int, length: int, mem_type: MemoryType) -> RegionHandle:
        region = RegionHandle(base, length, mem_type)
        self.attr_map.set_pages(base, length, mem_type)
        self.regions.append(region)
        return region

    def resolve_type(self, address: int) -> MemoryType:
        if not 0 <= address < self.memory_size:
            raise AddressOutOfRange(f"address {address:#x} outside memory")
        return self.attr_map.lookup(address)

    def set_region_type(self, region: RegionHandle, mem_type: MemoryType,
                        residency_probe=None) -> RegionHandle:
        """Retype a region. Fails if any of its lines is cached anywhere;
        the caller must invalidate between type changes.

        residency_probe(base, length) -> bool reports whether any line of the
        range is resident in the hierarchy.
        """
        if region not in self.regions:
            raise ValueError("region was not allocated by this model")
        if residency_probe is not None and residency_probe(region.base, region.length):
            raise ResidentLinesExist(
                f"region {region.base:#x}+{region.length:#x} has cached lines; "
                "invalidate before changing its memory type"
            )
        self.regions.remove(region)
        return self._install(region.base, region.length, mem_type)
