from .app import app, execute_run, request_to_config
from .schemas import RunReportModel, RunRequest

__all__ = ["app", "execute_run", "request_to_config", "RunRequest", "RunReportModel"]
