"""Entry point for running the CLI as a module (python -m goal_tensor_cli)."""

from goal_tensor_cli.cli import app

if __name__ == "__main__":
    app()
