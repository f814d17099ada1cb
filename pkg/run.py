"""
Startup script for the TPIA HTTP service.

Usage:
    python run.py
"""

import uvicorn

from src.utils import get_service_config


def main():
    config = get_service_config()
    uvicorn.run(
        "src.api.app:app",
        host=config["host"],
        port=config["port"],
        reload=config["reload"],
        log_level="info",
    )


if __name__ == "__main__":
    main()
