from dhj.cli import main

main()
