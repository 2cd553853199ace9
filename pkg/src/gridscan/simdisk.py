"""Simulated external memory: block-addressed files with transfer accounting.

All algorithm modules move their bulk data through a :class:`SimDisk`.  The
disk carves every file into blocks of ``block_bytes`` and counts block
transfers, split into sequential and random ones.  Two access regimes exist:

* ``access_block`` / ``read`` / ``write`` go through an LRU cache of
  ``memory_bytes // block_bytes`` blocks.  This is the path for
  cache-oblivious code and incidental accesses.
* ``read_direct`` / ``write_direct`` and the buffered stream/stack helpers
  model explicitly managed buffers: every block touched is counted, the LRU
  cache is bypassed.  Cache-aware algorithms use these.

No real I/O happens; file contents live in bytearrays and the counters are
the product.
"""

from __future__ import annotations

from collections import OrderedDict
from dataclasses import dataclass, field


class SimDiskError(Exception):
    pass


@dataclass(frozen=True)
class SimConfig:
    """Machine model parameters: block size B and memory size M, in bytes."""

    block_bytes: int
    memory_bytes: int

    def __post_init__(self):
        b, m = self.block_bytes, self.memory_bytes
        if b <= 0 or (b & (b - 1)) != 0:
            raise SimDiskError("block_bytes must be a positive power of two")
        if m < b * b:
            raise SimDiskError(
                "tall-cache violation: memory_bytes %d < block_bytes^2 %d" % (m, b * b)
            )

    @property
    def cache_blocks(self) -> int:
        return self.memory_bytes // self.block_bytes


@dataclass
class IoCounters:
    blocks_read: int = 0
    blocks_written: int = 0
    sequential_blocks: int = 0
    random_blocks: int = 0

    @property
    def bytes_transferred(self) -> int:
        # filled in by SimDisk.counters_snapshot; here for standalone use
        return self._bytes

    _bytes: int = field(default=0, repr=False)

    def as_json(self, config: SimConfig) -> dict:
        return {
            "blocks_read": self.blocks_read,
            "blocks_written": self.blocks_written,
            "sequential_blocks": self.sequential_blocks,
            "random_blocks": self.random_blocks,
            "bytes_transferred": self.bytes_transferred,
            "block_bytes": config.block_bytes,
            "memory_bytes": config.memory_bytes,
        }


class FileHandle:
    """Opaque reference to a simulated file."""

    __slots__ = ("file_id", "name", "disk")

    def __init__(self, file_id: int, name: str, disk: "SimDisk"):
        self.file_id = file_id
        self.name = name
        self.disk = disk

    @property
    def length_bytes(self) -> int:
        return len(self.disk._data[self.file_id])

    def __repr__(self):
        return "FileHandle(%r, %d bytes)" % (self.name, self.length_bytes)


class _FileStats:
    __slots__ = ("reads", "writes", "sequential", "random", "last_block")

    def __init__(self):
        self.reads = 0
        self.writes = 0
        self.sequential = 0
        self.random = 0
        self.last_block = None  # block index of the previous counted transfer


class SimDisk:
    """A set of block-padded files plus an LRU block cache and counters."""

    def __init__(self, config: SimConfig):
        self.config = config
        self._data: list[bytearray] = []
        self._names: dict[str, int] = {}
        self._stats: list[_FileStats] = []
        # cache maps (file_id, block_index) -> dirty flag, in LRU order
        self._cache: OrderedDict[tuple[int, int], bool] = OrderedDict()

    # -- file management ---------------------------------------------------

    def open_file(self, name: str) -> FileHandle:
        if name in self._names:
            raise SimDiskError("duplicate file name %r" % name)
        fid = len(self._data)
        self._names[name] = fid
        self._data.append(bytearray())
        self._stats.append(_FileStats())
        return FileHandle(fid, name, self)

    def _ensure_length(self, fid: int, end: int):
        """Grow (zero-pad) a file so it covers byte offset ``end - 1``."""
        b = self.config.block_bytes
        data = self._data[fid]
        if end > len(data):
            padded = -(-end // b) * b
            data.extend(b"\0" * (padded - len(data)))

    # -- counting helpers --------------------------------------------------

    def _count(self, fid: int, block: int, write: bool):
        st = self._stats[fid]
        if write:
            st.writes += 1
        else:
            st.reads += 1
        if st.last_block is None or block == st.last_block + 1:
            st.sequential += 1
        else:
            st.random += 1
        st.last_block = block

    # -- cached (LRU) access ----------------------------------------------

    def _evict_if_full(self):
        while len(self._cache) > self.config.cache_blocks:
            (fid, block), dirty = self._cache.popitem(last=False)
            if dirty:
                self._count(fid, block, write=True)

    def _touch(self, fid: int, block: int, write: bool):
        key = (fid, block)
        if key in self._cache:
            self._cache.move_to_end(key)
            if write:
                self._cache[key] = True
            return
        self._count(fid, block, write=write)
        # a counted write-miss is modelled as written through: clean in cache
        self._cache[key] = False
        self._evict_if_full()

    def access_block(self, handle: FileHandle, block_index: int, mode: str,
                     payload: bytes | None = None) -> bytes:
        """Read or write one whole block through the LRU cache."""
        b = self.config.block_bytes
        fid = handle.file_id
        if block_index < 0:
            raise SimDiskError("negative block index")
        if mode == "read":
            if (block_index + 1) * b > len(self._data[fid]):
                raise SimDiskError("read past end of %r" % handle.name)
            self._touch(fid, block_index, write=False)
            off = block_index * b
            return bytes(self._data[fid][off:off + b])
        elif mode == "write":
            payload = payload if payload is not None else b"\0" * b
            if len(payload) > b:
                raise SimDiskError("payload exceeds block size")
            self._ensure_length(fid, (block_index + 1) * b)
            self._touch(fid, block_index, write=True)
            off = block_index * b
            self._data[fid][off:off + len(payload)] = payload
            return b""
        raise SimDiskError("mode must be 'read' or 'write'")

    def read(self, handle: FileHandle, offset: int, nbytes: int) -> bytes:
        """Byte-range read through the LRU cache."""
        b = self.config.block_bytes
        fid = handle.file_id
        if offset + nbytes > len(self._data[fid]):
            raise SimDiskError("read past end of %r" % handle.name)
        for block in range(offset // b, -(-(offset + nbytes) // b) if nbytes else offset // b):
            self._touch(fid, block, write=False)
        return bytes(self._data[fid][offset:offset + nbytes])

    def write(self, handle: FileHandle, offset: int, data: bytes):
        """Byte-range write through the LRU cache."""
        b = self.config.block_bytes
        fid = handle.file_id
        self._ensure_length(fid, offset + len(data))
        if data:
            for block in range(offset // b, -(-(offset + len(data)) // b)):
                self._touch(fid, block, write=True)
        self._data[fid][offset:offset + len(data)] = data

    def flush(self):
        """Write back all dirty cached blocks (counted), keep them cached clean."""
        for key, dirty in list(self._cache.items()):
            if dirty:
                self._count(key[0], key[1], write=True)
                self._cache[key] = False

    # -- explicitly buffered access ---------------------------------------

    def _drop_cached(self, fid: int, first_block: int, last_block: int):
        for block in range(first_block, last_block + 1):
            self._cache.pop((fid, block), None)

    def read_direct(self, handle: FileHandle, offset: int, nbytes: int) -> bytes:
        """Counted read bypassing the cache: every touched block is a transfer."""
        b = self.config.block_bytes
        fid = handle.file_id
        if offset + nbytes > len(self._data[fid]):
            raise SimDiskError("read past end of %r" % handle.name)
        if nbytes:
            for block in range(offset // b, -(-(offset + nbytes) // b)):
                self._count(fid, block, write=False)
        return bytes(self._data[fid][offset:offset + nbytes])

    def write_direct(self, handle: FileHandle, offset: int, data: bytes):
        """Counted write bypassing the cache."""
        b = self.config.block_bytes
        fid = handle.file_id
        self._ensure_length(fid, offset + len(data))
        if data:
            first = offset // b
            last = (offset + len(data) - 1) // b
            for block in range(first, last + 1):
                self._count(fid, block, write=True)
            self._drop_cached(fid, first, last)
        self._data[fid][offset:offset + len(data)] = data

    def scan_reader(self, handle: FileHandle, offset: int = 0) -> "ScanReader":
        return ScanReader(self, handle, offset)

    def append_stream(self, handle: FileHandle, offset: int | None = None) -> "AppendStream":
        return AppendStream(self, handle, len(self._data[handle.file_id]) if offset is None else offset)

    # -- counters ----------------------------------------------------------

    def counters_snapshot(self) -> IoCounters:
        c = IoCounters()
        for st in self._stats:
            c.blocks_read += st.reads
            c.blocks_written += st.writes
            c.sequential_blocks += st.sequential
            c.random_blocks += st.random
        c._bytes = (c.blocks_read + c.blocks_written) * self.config.block_bytes
        return c

    def file_counters(self, handle: FileHandle) -> IoCounters:
        st = self._stats[handle.file_id]
        c = IoCounters(st.reads, st.writes, st.sequential, st.random)
        c._bytes = (st.reads + st.writes) * self.config.block_bytes
        return c

    def reset_counters(self):
        for i in range(len(self._stats)):
            self._stats[i] = _FileStats()

    # -- uncounted raw access (oracles, tests, host export) ----------------

    def raw_bytes(self, handle: FileHandle) -> bytes:
        return bytes(self._data[handle.file_id])

    def load_raw(self, handle: FileHandle, data: bytes):
        """Preload file contents without counting (host import)."""
        b = self.config.block_bytes
        buf = bytearray(data)
        if len(buf) % b:
            buf.extend(b"\0" * (b - len(buf) % b))
        self._data[handle.file_id] = buf


class ScanReader:
    """Sequential reader with an explicit one-block buffer.

    Each block of the scanned range is counted exactly once, regardless of the
    LRU cache state.
    """

    def __init__(self, disk: SimDisk, handle: FileHandle, offset: int):
        self.disk = disk
        self.handle = handle
        self.pos = offset
        self._counted_until = offset // disk.config.block_bytes - 1

    def read(self, nbytes: int) -> bytes:
        disk, b = self.disk, self.disk.config.block_bytes
        fid = self.handle.file_id
        if self.pos + nbytes > len(disk._data[fid]):
            raise SimDiskError("scan past end of %r" % self.handle.name)
        if nbytes:
            last = (self.pos + nbytes - 1) // b
            for block in range(self._counted_until + 1, last + 1):
                disk._count(fid, block, write=False)
            self._counted_until = max(self._counted_until, last)
        out = bytes(disk._data[fid][self.pos:self.pos + nbytes])
        self.pos += nbytes
        return out

    def skip(self, nbytes: int):
        self.read(nbytes)


class AppendStream:
    """Sequential writer with an explicit one-block buffer.

    A block is counted as written when the stream moves past it; ``close``
    flushes the final partial block.
    """

    def __init__(self, disk: SimDisk, handle: FileHandle, offset: int):
        self.disk = disk
        self.handle = handle
        self.pos = offset
        self._counted_until = offset // disk.config.block_bytes - 1
        self._open = True

    def write(self, data: bytes):
        disk, b = self.disk, self.disk.config.block_bytes
        fid = self.handle.file_id
        disk._ensure_length(fid, self.pos + len(data))
        disk._data[fid][self.pos:self.pos + len(data)] = data
        self.pos += len(data)
        # count all blocks that are now completely behind the write position
        last_full = self.pos // b - 1
        for block in range(self._counted_until + 1, last_full + 1):
            disk._count(fid, block, write=True)
            disk._cache.pop((fid, block), None)
        self._counted_until = max(self._counted_until, last_full)

    def close(self):
        if not self._open:
            return
        disk, b = self.disk, self.disk.config.block_bytes
        fid = self.handle.file_id
        if self.pos % b:
            block = self.pos // b
            if block > self._counted_until:
                disk._count(fid, block, write=True)
                disk._cache.pop((fid, block), None)
                self._counted_until = block
        self._open = False


class FileStack:
    """LIFO of byte records on a simulated file.

    Keeps an interval of ``buffer_blocks`` blocks around the top resident in
    (uncounted) memory; transfers are counted only when blocks leave or enter
    that window.  Records are framed as ``payload || length:u32`` so the most
    recent record can be popped without an index.
    """

    def __init__(self, disk: SimDisk, handle: FileHandle, buffer_blocks: int = 1):
        if buffer_blocks < 1:
            raise SimDiskError("buffer_blocks must be >= 1")
        self.disk = disk
        self.handle = handle
        self.cap = buffer_blocks
        self.top = 0          # one past the last stacked byte
        self.count = 0
        self._lo = 0          # resident block interval [lo, hi]
        self._hi = 0

    def push(self, record: bytes):
        disk, b = self.disk, self.disk.config.block_bytes
        fid = self.handle.file_id
        framed = record + len(record).to_bytes(4, "little")
        end = self.top + len(framed)
        disk._ensure_length(fid, end)
        disk._data[fid][self.top:end] = framed
        self.top = end
        self.count += 1
        top_block = (self.top - 1) // b
        if top_block > self._hi:
            self._hi = top_block          # fresh blocks, no transfer
        while self._hi - self._lo + 1 > self.cap:
            disk._count(fid, self._lo, write=True)
            self._lo += 1

    def pop(self) -> bytes:
        if self.count == 0:
            raise SimDiskError("pop on empty stack")
        disk, b = self.disk, self.disk.config.block_bytes
        fid = self.handle.file_id
        data = disk._data[fid]
        length = int.from_bytes(data[self.top - 4:self.top], "little")
        start = self.top - 4 - length
        first_block = start // b if length + 4 else self._lo
        if start // b < self._lo:
            for block in range(self._lo - 1, start // b - 1, -1):
                disk._count(fid, block, write=False)
            self._lo = start // b
        record = bytes(data[start:start + length])
        self.top = start
        self.count -= 1
        top_block = (self.top - 1) // b if self.top else 0
        if top_block < self._hi:
            self._hi = max(top_block, self._lo)
        return record

    def __len__(self):
        return self.count
