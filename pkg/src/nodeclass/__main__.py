from nodeclass.cli import main

main()
