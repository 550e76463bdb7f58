#!/usr/bin/env node
import { hideBin } from "yargs/helpers";
import { main } from "../dist/cli.js";

process.exit(main(hideBin(process.argv)));
