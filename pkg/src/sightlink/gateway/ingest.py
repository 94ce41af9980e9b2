"""TCP chunk-stream ingestion: 1-byte length prefix per serialized chunk.

The device side writes [len][chunk bytes] with len in 2..182; the server
feeds each chunk into the per-connection frame assembly of a GatewayCore.
"""

from __future__ import annotations

import asyncio
import logging

from ..transport import CHUNK_MAX, HEADER_SIZE

logger = logging.getLogger(__name__)


async def _serve_connection(core, reader: asyncio.StreamReader, writer: asyncio.StreamWriter):
    peer = writer.get_extra_info("peername")
    connection_id = f"{peer[0]}:{peer[1]}" if peer else hex(id(writer))
    logger.info("device connected: %s", connection_id)
    try:
        while True:
            prefix = await reader.readexactly(1)
            length = prefix[0]
            if not HEADER_SIZE <= length <= CHUNK_MAX:
                logger.warning(
                    "%s: bad length prefix %d, closing connection", connection_id, length
                )
                break
            raw = await reader.readexactly(length)
            core.ingest_chunk(connection_id, raw)
    except (asyncio.IncompleteReadError, ConnectionResetError):
        pass
    finally:
        core.drop_connection(connection_id)
        writer.close()
        try:
            await writer.wait_closed()
        except (ConnectionResetError, BrokenPipeError, OSError):
            pass
        logger.info("device disconnected: %s", connection_id)


async def start_ingest_server(core, host: str = "127.0.0.1", port: int = 0):
    """Starts the listener; returns (server, bound_port)."""

    async def handler(reader, writer):
        await _serve_connection(core, reader, writer)

    server = await asyncio.start_server(handler, host, port)
    bound_port = server.sockets[0].getsockname()[1]
    logger.info("ingest listening on %s:%d", host, bound_port)
    return server, bound_port
