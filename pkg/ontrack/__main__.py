from ontrack.cli.main import run

run()
