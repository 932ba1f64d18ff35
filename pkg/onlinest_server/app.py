"""
onlinest bridge server - serves an in-process model over WebSocket so the
decoding engine can drive it from another process.

    uvicorn onlinest_server.app:app --host 0.0.0.0 --port 9300
"""
from __future__ import annotations

import asyncio
import logging
from contextlib import asynccontextmanager
from typing import Optional

from fastapi import FastAPI, WebSocket, WebSocketDisconnect

from onlinest.bridge.session import BridgeSessionHost
from onlinest.config import OnlineConfig
from onlinest.errors import ConfigurationError
from onlinest.model.base import SpeechTranslationModel
from onlinest.model.toy import ToyModel

logger = logging.getLogger(__name__)


def _load_model(cfg: OnlineConfig) -> SpeechTranslationModel:
    if not cfg.model_path:
        raise ConfigurationError("ONLINEST_MODEL_PATH is not set; nothing to serve")
    return ToyModel.load(cfg.model_path)


def create_app(model: Optional[SpeechTranslationModel] = None, cfg: Optional[OnlineConfig] = None) -> FastAPI:
    """Build the bridge app; without a model, one is loaded from cfg.model_path at startup."""

    @asynccontextmanager
    async def lifespan(app: FastAPI):
        # Startup
        if app.state.model is None:
            app.state.model = _load_model(app.state.cfg)
        logger.info(f"[BridgeServer] Serving model with V={app.state.model.vocab.size}, D={app.state.model.input_dim}")
        yield
        # Shutdown
        logger.info(f"[BridgeServer] Shutting down with {app.state.sessions} open session(s)")

    app = FastAPI(lifespan=lifespan)
    app.state.cfg = cfg or OnlineConfig()
    app.state.model = model
    app.state.sessions = 0

    @app.get("/healthz")
    def healthz():
        """Health check endpoint."""
        return {"ok": app.state.model is not None, "sessions": app.state.sessions}

    @app.websocket("/ws/model")
    async def ws_model(ws: WebSocket):
        model: Optional[SpeechTranslationModel] = ws.app.state.model
        await ws.accept()
        if model is None:
            await ws.close(code=1011, reason="no model loaded")
            return

        host = BridgeSessionHost(model)
        ws.app.state.sessions += 1
        try:
            while True:
                text = await ws.receive_text()
                # model calls are CPU bound; keep the event loop free for other sessions
                reply = await asyncio.to_thread(host.handle_text, text)
                await ws.send_text(reply)
        except WebSocketDisconnect:
            logger.info(f"[BridgeServer] Session {host.session_id} disconnected")
        except Exception as e:
            logger.error(f"[BridgeServer] WebSocket error: {e}")
            try:
                await ws.close(code=1011)
            except Exception:
                pass
        finally:
            ws.app.state.sessions -= 1

    return app


app = create_app()


if __name__ == "__main__":
    import uvicorn

    _cfg = OnlineConfig()
    logging.basicConfig(level=_cfg.log_level)
    uvicorn.run(app, host=_cfg.host, port=_cfg.port)
