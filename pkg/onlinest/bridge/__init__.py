from onlinest.bridge.client import Channel, RemoteDecoderState, RemoteModel, WebSocketChannel, remote_model
from onlinest.bridge.protocol import PROTOCOL_VERSION
from onlinest.bridge.session import BridgeSession, BridgeSessionHost

__all__ = [
    "BridgeSession",
    "BridgeSessionHost",
    "Channel",
    "PROTOCOL_VERSION",
    "RemoteDecoderState",
    "RemoteModel",
    "WebSocketChannel",
    "remote_model",
]
