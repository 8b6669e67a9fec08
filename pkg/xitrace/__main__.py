from xitrace.cli import main

main()
