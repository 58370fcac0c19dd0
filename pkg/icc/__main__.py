"""python -m icc"""
from icc.cli import main

main()
