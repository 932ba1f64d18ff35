__all__ = ["app", "create_app"]
