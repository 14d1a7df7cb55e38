from hetauth.cli import run

run()
