"""PyInstaller entry point"""
from jointconcordance.__main__ import main

main()
