"""Permite `python -m src` con el mismo nombre de programa que el script instalado"""
from .cli import app

if __name__ == "__main__":
    app(prog_name="questa")
