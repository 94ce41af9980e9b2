from __future__ import annotations

import random

import pytest

from sightlink.transport import (
    CHUNK_MAX,
    DATA_INDEX_MAX,
    IMAGE_MAX_BYTES,
    PAYLOAD_MAX,
    AssemblyState,
    Chunk,
    ChunkCodec,
    EmptyDataPayloadError,
    EmptyImageError,
    FailureKind,
    FedAfterTerminalError,
    FrameAssembly,
    ImageTooLargeError,
    ProtocolViolationError,
    TooLongError,
    TooShortError,
    deserialize_chunk,
    encode_frame,
    serialize_chunk,
)


def feed_all(assembly: FrameAssembly, chunks) -> AssemblyState:
    state = assembly.state
    for chunk in chunks:
        state = assembly.feed(chunk)
    return state


def test_encode_360_bytes_gives_two_full_chunks():
    chunks = encode_frame(bytes(360))
    assert len(chunks) == 3
    assert chunks[0].frame_index == 0 and len(chunks[0].payload) == 180
    assert chunks[1].frame_index == 1 and len(chunks[1].payload) == 180
    assert chunks[2].is_end_flag


def test_encode_minimum_one_byte():
    chunks = encode_frame(b"\x42")
    assert len(chunks) == 2
    assert chunks[0].frame_index == 0 and chunks[0].payload == b"\x42"
    assert chunks[1].is_end_flag


def test_encode_one_byte_overflow():
    chunks = encode_frame(bytes(181))
    assert [len(c.payload) for c in chunks[:-1]] == [180, 1]
    assert chunks[-1].is_end_flag


def test_encode_rejects_empty_and_oversized():
    with pytest.raises(EmptyImageError):
        encode_frame(b"")
    with pytest.raises(ImageTooLargeError):
        encode_frame(bytes(IMAGE_MAX_BYTES + 1))


def test_encode_chunk_count_is_ceil_len_over_180():
    rng = random.Random(11)
    for _ in range(50):
        n = rng.randint(1, 4000)
        chunks = encode_frame(rng.randbytes(n))
        assert len(chunks) - 1 == (n + PAYLOAD_MAX - 1) // PAYLOAD_MAX


def test_serialize_little_endian_header():
    raw = serialize_chunk(Chunk(1, b"\xab"))
    assert raw == b"\x01\x00\xab"
    # round-trip confirms the layout
    assert deserialize_chunk(raw) == Chunk(1, b"\xab")


def test_serialize_end_flag_is_ff_ff():
    assert serialize_chunk(Chunk.end_flag()) == b"\xff\xff"


def test_serialize_max_size_chunk():
    raw = serialize_chunk(Chunk(0, bytes(180)))
    assert len(raw) == CHUNK_MAX
    assert raw[:2] == b"\x00\x00"


def test_deserialize_end_flag():
    chunk = deserialize_chunk(b"\xff\xff")
    assert chunk.is_end_flag


def test_deserialize_data_round_trip():
    chunk = deserialize_chunk(bytes([0x02, 0x00, 0x01, 0x02]))
    assert chunk == Chunk(2, b"\x01\x02")
    assert serialize_chunk(chunk) == bytes([0x02, 0x00, 0x01, 0x02])


def test_deserialize_rejects_malformed():
    with pytest.raises(TooShortError):
        deserialize_chunk(b"\x05")
    with pytest.raises(TooLongError):
        deserialize_chunk(bytes(CHUNK_MAX + 1))
    with pytest.raises(EmptyDataPayloadError):
        deserialize_chunk(b"\x07\x00")
    with pytest.raises(ProtocolViolationError):
        deserialize_chunk(b"\xff\xff\x01")


def test_serialize_deserialize_inverse_random_chunks():
    rng = random.Random(23)
    for _ in range(200):
        chunk = Chunk(rng.randint(0, DATA_INDEX_MAX), rng.randbytes(rng.randint(1, 180)))
        assert deserialize_chunk(serialize_chunk(chunk)) == chunk
    assert deserialize_chunk(serialize_chunk(Chunk.end_flag())) == Chunk.end_flag()


def test_big_endian_codec_round_trip():
    codec = ChunkCodec("big")
    raw = codec.serialize(Chunk(1, b"\xab"))
    assert raw == b"\x00\x01\xab"
    assert codec.deserialize(raw) == Chunk(1, b"\xab")
    assert codec.serialize(Chunk.end_flag()) == b"\xff\xff"


def test_chunk_invariants_enforced():
    with pytest.raises(ProtocolViolationError):
        Chunk(0, b"")
    with pytest.raises(ProtocolViolationError):
        Chunk(0, bytes(181))
    with pytest.raises(ProtocolViolationError):
        Chunk(0xFFFF, b"\x01")
    with pytest.raises(ProtocolViolationError):
        Chunk(0x10000, b"\x01")


def test_feed_in_order_completes():
    image = bytes(range(200)) + bytes(160)
    assembly = FrameAssembly()
    assert feed_all(assembly, encode_frame(image)) is AssemblyState.COMPLETE
    assert assembly.image() == image


def test_feed_gap_detected():
    chunks = encode_frame(bytes(3 * 180))
    assembly = FrameAssembly()
    state = feed_all(assembly, [chunks[0], chunks[2], chunks[3]])
    assert state is AssemblyState.FAILED
    assert assembly.failure.kind is FailureKind.MISSING_CHUNKS
    assert assembly.failure.missing == {1}


def test_feed_order_independent():
    image = bytes(300)
    chunks = encode_frame(image)
    assembly = FrameAssembly()
    state = feed_all(assembly, [chunks[1], chunks[0], chunks[2]])
    assert state is AssemblyState.COMPLETE
    assert assembly.image() == image


def test_conflicting_duplicate_is_protocol_violation():
    assembly = FrameAssembly()
    assembly.feed(Chunk(0, b"P"))
    with pytest.raises(ProtocolViolationError):
        assembly.feed(Chunk(0, b"Q"))


def test_identical_duplicate_ignored():
    image = bytes(250)
    chunks = encode_frame(image)
    assembly = FrameAssembly()
    assembly.feed(chunks[0])
    assembly.feed(chunks[0])
    assembly.feed(chunks[1])
    assert assembly.feed(chunks[2]) is AssemblyState.COMPLETE
    assert assembly.image() == image


def test_feed_after_terminal_raises():
    assembly = FrameAssembly()
    feed_all(assembly, encode_frame(b"x"))
    assert assembly.state is AssemblyState.COMPLETE
    with pytest.raises(FedAfterTerminalError):
        assembly.feed(Chunk(0, b"x"))


def test_end_flag_alone_fails_missing_first_chunk():
    assembly = FrameAssembly()
    assert assembly.feed(Chunk.end_flag()) is AssemblyState.FAILED
    assert assembly.failure.missing == {0}


def test_timeout_strictly_exceeded():
    assembly = FrameAssembly(started_at=0.0)
    assert assembly.check_timeout(now=11.0, limit=10.0) is AssemblyState.FAILED
    assert assembly.failure.kind is FailureKind.TIMEOUT


def test_timeout_boundary_not_exceeded():
    assembly = FrameAssembly(started_at=0.0)
    assert assembly.check_timeout(now=10.0, limit=10.0) is AssemblyState.INCOMPLETE


def test_timeout_noop_on_terminal():
    assembly = FrameAssembly()
    feed_all(assembly, encode_frame(b"x"))
    assert assembly.check_timeout(now=999.0, limit=1.0) is AssemblyState.COMPLETE


def test_round_trip_random_sizes_and_permutations():
    rng = random.Random(7)
    for _ in range(60):
        image = rng.randbytes(rng.randint(1, 2500))
        chunks = encode_frame(image)
        data = chunks[:-1]
        rng.shuffle(data)
        assembly = FrameAssembly()
        state = feed_all(assembly, data + [Chunk.end_flag()])
        assert state is AssemblyState.COMPLETE
        assert assembly.image() == image


def test_drop_any_interior_chunk_names_the_gap():
    rng = random.Random(5)
    image = rng.randbytes(6 * 180)
    chunks = encode_frame(image)
    n_data = len(chunks) - 1
    for dropped in range(n_data - 1):
        assembly = FrameAssembly()
        kept = [c for c in chunks[:-1] if c.frame_index != dropped]
        state = feed_all(assembly, kept + [Chunk.end_flag()])
        assert state is AssemblyState.FAILED
        assert assembly.failure.missing == {dropped}


def test_drop_final_data_chunk_truncates_silently():
    image = bytes(range(256)) * 3
    chunks = encode_frame(image)
    assembly = FrameAssembly()
    state = feed_all(assembly, chunks[:-2] + [Chunk.end_flag()])
    assert state is AssemblyState.COMPLETE
    assert assembly.image() == image[: (len(chunks) - 2) * 180]


def test_verify_jpeg_catches_trailing_truncation():
    image = b"\xff\xd8" + bytes(400) + b"\xff\xd9"
    chunks = encode_frame(image)
    truncated = chunks[:-2] + [Chunk.end_flag()]
    assembly = FrameAssembly(verify_jpeg=True)
    assert feed_all(assembly, truncated) is AssemblyState.FAILED
    assert assembly.failure.kind is FailureKind.CORRUPT_IMAGE
    # the untruncated stream still completes
    assembly = FrameAssembly(verify_jpeg=True)
    assert feed_all(assembly, chunks) is AssemblyState.COMPLETE
