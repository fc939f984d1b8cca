//! Built-in value pools for profile generation.
//!
//! All entries are plain ASCII letters, digits and spaces (hometowns carry a
//! single ", " between city and state), so byte offsets equal char offsets
//! everywhere downstream and no entry collides with the tokenizer's mark
//! characters.

pub const FIRST_NAMES: &[&str] = &[
    "Aaron", "Abigail", "Adam", "Adrian", "Aiden", "Alan", "Albert", "Alexa", "Alexander",
    "Alice", "Alicia", "Allison", "Alyssa", "Amanda", "Amber", "Amelia", "Amy", "Andrea",
    "Andrew", "Angela", "Anna", "Anthony", "April", "Ariana", "Arthur", "Ashley", "Austin",
    "Bailey", "Barbara", "Benjamin", "Bernard", "Beth", "Betty", "Beverly", "Blake", "Bonnie",
    "Bradley", "Brandon", "Brenda", "Brian", "Brittany", "Brooke", "Bruce", "Bryan", "Caleb",
    "Cameron", "Carl", "Carla", "Carlos", "Carol", "Caroline", "Carrie", "Casey", "Catherine",
    "Chad", "Charles", "Charlotte", "Chase", "Chelsea", "Cheryl", "Chloe", "Christian",
    "Christina", "Christopher", "Cindy", "Claire", "Clara", "Clarence", "Claudia", "Clifford",
    "Cody", "Cole", "Colin", "Connor", "Corey", "Courtney", "Craig", "Crystal", "Curtis",
    "Cynthia", "Dale", "Daniel", "Danielle", "Danny", "Darlene", "David", "Dawn", "Dean",
    "Deborah", "Dennis", "Derek", "Diana", "Diane", "Dominic", "Donald", "Donna", "Doris",
    "Dorothy", "Douglas", "Dustin", "Dylan", "Earl", "Eden", "Edgar", "Edith", "Edward",
    "Elaine", "Eleanor", "Elena", "Elijah", "Elizabeth", "Ella", "Ellen", "Emily", "Emma",
    "Eric", "Erica", "Erin", "Ethan", "Eugene", "Eva", "Evan", "Evelyn", "Faith", "Felicia",
    "Fernando", "Fiona", "Frances", "Francis", "Frank", "Gabriel", "Gail", "Garrett", "Gary",
    "Gavin", "George", "Gerald", "Gina", "Glenn", "Gloria", "Gordon", "Grace", "Grant",
    "Gregory", "Hannah", "Harold", "Harry", "Hazel", "Heather", "Helen", "Henry", "Holly",
    "Howard", "Hunter", "Ian", "Irene", "Isaac", "Isabella", "Ivan", "Jack", "Jacob",
    "Jacqueline", "James", "Jamie", "Jane", "Janet", "Janice", "Jared", "Jasmine", "Jason",
    "Jean", "Jeffrey", "Jennifer", "Jeremy", "Jerome", "Jerry", "Jessica", "Jill", "Joan",
    "Joanna", "Joel", "John", "Jonathan", "Jordan", "Jose", "Joseph", "Joshua", "Joyce",
    "Juan", "Judith", "Julia", "Julian", "Julie", "Justin", "Karen", "Katherine", "Kathleen",
    "Kathryn", "Kayla", "Keith", "Kelly", "Kenneth", "Kevin", "Kimberly", "Kyle", "Larry",
    "Laura", "Lauren", "Lawrence", "Leah", "Leonard", "Leslie", "Lillian", "Linda", "Lisa",
    "Logan", "Lori", "Louis", "Lucas", "Lucy", "Luis", "Luke", "Lydia", "Madison", "Marcus",
    "Margaret", "Maria", "Marie", "Marilyn", "Marion", "Mark", "Martha", "Martin", "Marvin",
    "Mary", "Mason", "Matthew", "Maureen", "Maxwell", "Megan", "Melanie", "Melissa",
    "Michael", "Michelle", "Miguel", "Mildred", "Miranda", "Mitchell", "Molly", "Monica",
    "Morgan", "Nancy", "Naomi", "Natalie", "Nathan", "Nicholas", "Nicole", "Noah", "Nora",
    "Norman", "Oliver", "Olivia", "Oscar", "Owen", "Pamela", "Patricia", "Patrick", "Paul",
    "Paula", "Peggy", "Peter", "Philip", "Phoebe", "Phyllis", "Preston", "Rachel", "Ralph",
    "Randall", "Randy", "Raymond", "Rebecca", "Regina", "Renee", "Rhonda", "Richard",
    "Ricky", "Rita", "Robert", "Roberta", "Robin", "Rodney", "Roger", "Ronald", "Rose",
    "Roy", "Ruby", "Russell", "Ruth", "Ryan", "Sabrina", "Samantha", "Samuel", "Sandra",
    "Sara", "Sarah", "Scott", "Sean", "Sebastian", "Seth", "Shannon", "Sharon", "Shawn",
    "Sheila", "Shelby", "Shirley", "Sidney", "Simon", "Sophia", "Spencer", "Stacy",
    "Stanley", "Stephanie", "Stephen", "Steven", "Stuart", "Susan", "Sylvia", "Tamara",
    "Tanya", "Tara", "Taylor", "Teresa", "Terry", "Theodore", "Theresa", "Thomas",
    "Tiffany", "Timothy", "Tina", "Todd", "Tracy", "Travis", "Trevor", "Tyler", "Valerie",
    "Vanessa", "Veronica", "Victor", "Victoria", "Vincent", "Violet", "Virginia", "Vivian",
    "Walter", "Wanda", "Warren", "Wayne", "Wendy", "Wesley", "William", "Willie", "Wyatt",
    "Xavier", "Yolanda", "Yvonne", "Zachary", "Zoe",
];

pub const LAST_NAMES: &[&str] = &[
    "Adams", "Alexander", "Allen", "Alvarez", "Anderson", "Andrews", "Armstrong", "Arnold",
    "Bailey", "Baker", "Baldwin", "Banks", "Barker", "Barnes", "Barrett", "Bates", "Beck",
    "Bell", "Benitez", "Bennett", "Benson", "Berry", "Bishop", "Black", "Blair", "Blake",
    "Bowen", "Bowman", "Boyd", "Bradley", "Brady", "Brewer", "Brooks", "Brown", "Bryant",
    "Burgess", "Burke", "Burns", "Burton", "Bush", "Butler", "Byrd", "Caldwell", "Campbell",
    "Cannon", "Carlson", "Carpenter", "Carr", "Carroll", "Carter", "Castillo", "Castro",
    "Chambers", "Chandler", "Chapman", "Chavez", "Christensen", "Clark", "Clarke", "Cobb",
    "Cohen", "Cole", "Coleman", "Collins", "Conner", "Cook", "Cooper", "Copeland", "Cortez",
    "Cox", "Craig", "Crawford", "Cross", "Cruz", "Cunningham", "Curry", "Curtis", "Daniels",
    "Davidson", "Davis", "Dawson", "Day", "Dean", "Delgado", "Dennis", "Diaz", "Dixon",
    "Dominguez", "Douglas", "Doyle", "Drake", "Duncan", "Dunn", "Edwards", "Elliott",
    "Ellis", "Erickson", "Espinoza", "Estrada", "Evans", "Farmer", "Ferguson", "Fernandez",
    "Fields", "Figueroa", "Fisher", "Fitzgerald", "Fleming", "Fletcher", "Flores", "Ford",
    "Foster", "Fowler", "Fox", "Francis", "Franklin", "Frazier", "Freeman", "French",
    "Fuller", "Garcia", "Gardner", "Garner", "Garrett", "Garza", "George", "Gibbs",
    "Gibson", "Gilbert", "Gill", "Glover", "Gomez", "Gonzalez", "Goodman", "Goodwin",
    "Gordon", "Graham", "Grant", "Graves", "Gray", "Green", "Greene", "Gregory", "Griffin",
    "Griffith", "Gross", "Guerrero", "Gutierrez", "Guzman", "Hale", "Hall", "Hamilton",
    "Hammond", "Hampton", "Hansen", "Hanson", "Hardy", "Harmon", "Harper", "Harrington",
    "Harris", "Harrison", "Hart", "Harvey", "Hawkins", "Hayes", "Haynes", "Henderson",
    "Henry", "Hernandez", "Herrera", "Hicks", "Higgins", "Hill", "Hines", "Hodges",
    "Hoffman", "Hogan", "Holland", "Holloway", "Holmes", "Holt", "Hopkins", "Horton",
    "Howard", "Howell", "Hubbard", "Hudson", "Huff", "Hughes", "Hunt", "Hunter", "Ingram",
    "Jackson", "Jacobs", "James", "Jenkins", "Jennings", "Jensen", "Jimenez", "Johnson",
    "Johnston", "Jones", "Jordan", "Joseph", "Juarez", "Keller", "Kelley", "Kelly",
    "Kennedy", "Kim", "King", "Knight", "Lamb", "Lambert", "Lane", "Larson", "Lawrence",
    "Lawson", "Lee", "Leonard", "Lewis", "Lindsey", "Little", "Logan", "Long", "Lopez",
    "Love", "Lowe", "Lucas", "Luna", "Lynch", "Lyons", "Mack", "Maldonado", "Malone",
    "Mann", "Manning", "Marquez", "Marsh", "Marshall", "Martin", "Martinez", "Mason",
    "Matthews", "Maxwell", "May", "McBride", "McCarthy", "McCoy", "McDaniel", "McDonald",
    "McGee", "McGuire", "McKenzie", "McKinney", "McLaughlin", "Medina", "Mejia", "Mendez",
    "Mendoza", "Meyer", "Miles", "Miller", "Mills", "Mitchell", "Montgomery", "Moody",
    "Moon", "Moore", "Morales", "Moran", "Moreno", "Morgan", "Morris", "Morrison",
    "Morton", "Moss", "Mullins", "Munoz", "Murphy", "Murray", "Myers", "Nash", "Neal",
    "Nelson", "Newman", "Newton", "Nguyen", "Nichols", "Norman", "Norris", "Norton",
    "Nunez", "Ochoa", "Oliver", "Olson", "Ortega", "Ortiz", "Osborne", "Owen", "Owens",
    "Pace", "Padilla", "Page", "Palmer", "Park", "Parker", "Parks", "Parsons", "Patel",
    "Patterson", "Payne", "Pearson", "Pena", "Perez", "Perkins", "Perry", "Peters",
    "Peterson", "Phelps", "Phillips", "Pierce", "Pittman", "Poole", "Pope", "Porter",
    "Potter", "Powell", "Powers", "Pratt", "Price", "Quinn", "Ramirez", "Ramos", "Ramsey",
    "Randall", "Ray", "Reed", "Reese", "Reeves", "Reid", "Reyes", "Reynolds", "Rhodes",
    "Rice", "Richards", "Richardson", "Riley", "Rios", "Rivera", "Robbins", "Roberson",
    "Roberts", "Robertson", "Robinson", "Rodgers", "Rodriguez", "Rogers", "Rojas",
    "Romero", "Rosales", "Rose", "Ross", "Rowe", "Ruiz", "Russell", "Ryan", "Salazar",
    "Salinas", "Sanchez", "Sanders", "Sandoval", "Santiago", "Santos", "Saunders",
    "Schmidt", "Schneider", "Schroeder", "Schultz", "Scott", "Serrano", "Sharp", "Shaw",
    "Shelton", "Sherman", "Silva", "Simmons", "Simon", "Simpson", "Sims", "Singh",
    "Singleton", "Skinner", "Sloan", "Small", "Smith", "Snyder", "Soto", "Sparks",
    "Spencer", "Stafford", "Stanley", "Steele", "Stephens", "Stevens", "Stevenson",
    "Stewart", "Stokes", "Stone", "Strickland", "Sullivan", "Summers", "Sutton",
    "Swanson", "Sweeney", "Tanner", "Tate", "Taylor", "Terry", "Thomas", "Thompson",
    "Thornton", "Todd", "Torres", "Townsend", "Tran", "Tucker", "Turner", "Tyler",
    "Underwood", "Valdez", "Valencia", "Vargas", "Vasquez", "Vaughn", "Vazquez", "Vega",
    "Velasquez", "Wade", "Wagner", "Walker", "Wallace", "Walsh", "Walters", "Walton",
    "Ward", "Warner", "Warren", "Washington", "Waters", "Watkins", "Watson", "Watts",
    "Weaver", "Webb", "Weber", "Webster", "Wells", "West", "Wheeler", "White", "Whitney",
    "Wilcox", "Wilkins", "Wilkinson", "Williams", "Williamson", "Willis", "Wilson",
    "Winters", "Wise", "Wolf", "Wolfe", "Wood", "Woods", "Wright", "Wyatt", "Yates",
    "York", "Young", "Zamora", "Zimmerman",
];

pub const COLLEGES: &[&str] = &[
    "Stanford University", "Harvard University", "Yale University", "Princeton University",
    "Columbia University", "Cornell University", "Duke University", "Brown University",
    "Dartmouth College", "Boston University", "Boston College", "Northwestern University",
    "Georgetown University", "Vanderbilt University", "Rice University", "Emory University",
    "Tulane University", "Baylor University", "Fordham University", "Villanova University",
    "Purdue University", "Indiana University", "Michigan State University",
    "Ohio State University", "Penn State University", "Rutgers University",
    "Syracuse University", "Temple University", "Gonzaga University", "Creighton University",
    "Marquette University", "DePaul University", "Drexel University", "Clemson University",
    "Auburn University", "Howard University", "Spelman College", "Oberlin College",
    "Amherst College", "Williams College", "Pomona College", "Reed College",
    "Carleton College", "Grinnell College", "Bowdoin College", "Colgate University",
    "Lehigh University", "Bucknell University", "Lafayette College", "Swarthmore College",
];

pub const MAJORS: &[&str] = &[
    "Computer Science", "Electrical Engineering", "Mechanical Engineering",
    "Civil Engineering", "Chemical Engineering", "Biology", "Chemistry", "Physics",
    "Mathematics", "Statistics", "Economics", "Finance", "Accounting", "Marketing",
    "Management", "Psychology", "Sociology", "Anthropology", "Political Science",
    "International Relations", "History", "Philosophy", "English Literature",
    "Linguistics", "Journalism", "Graphic Design", "Architecture", "Music Theory",
    "Environmental Science", "Nursing",
];

pub const HOMETOWNS: &[&str] = &[
    "Santa Clarita, California", "Austin, Texas", "Portland, Oregon", "Denver, Colorado",
    "Phoenix, Arizona", "Seattle, Washington", "Boise, Idaho", "Omaha, Nebraska",
    "Wichita, Kansas", "Tulsa, Oklahoma", "Memphis, Tennessee", "Nashville, Tennessee",
    "Louisville, Kentucky", "Columbus, Ohio", "Cleveland, Ohio", "Cincinnati, Ohio",
    "Indianapolis, Indiana", "Detroit, Michigan", "Milwaukee, Wisconsin",
    "Madison, Wisconsin", "Minneapolis, Minnesota", "Saint Paul, Minnesota",
    "Des Moines, Iowa", "Fargo, North Dakota", "Sioux Falls, South Dakota",
    "Billings, Montana", "Cheyenne, Wyoming", "Salt Lake City, Utah", "Las Vegas, Nevada",
    "Reno, Nevada", "Sacramento, California", "Fresno, California", "San Diego, California",
    "San Jose, California", "Oakland, California", "Bakersfield, California",
    "Anaheim, California", "Riverside, California", "Stockton, California",
    "Irvine, California", "Tucson, Arizona", "Mesa, Arizona", "Albuquerque, New Mexico",
    "Santa Fe, New Mexico", "El Paso, Texas", "Houston, Texas", "Dallas, Texas",
    "San Antonio, Texas", "Fort Worth, Texas", "Arlington, Texas", "Plano, Texas",
    "Laredo, Texas", "Lubbock, Texas", "Amarillo, Texas", "Corpus Christi, Texas",
    "New Orleans, Louisiana", "Baton Rouge, Louisiana", "Shreveport, Louisiana",
    "Jackson, Mississippi", "Birmingham, Alabama", "Montgomery, Alabama",
    "Mobile, Alabama", "Atlanta, Georgia", "Savannah, Georgia", "Augusta, Georgia",
    "Jacksonville, Florida", "Miami, Florida", "Tampa, Florida", "Orlando, Florida",
    "Tallahassee, Florida", "Charlotte, North Carolina", "Raleigh, North Carolina",
    "Durham, North Carolina", "Greensboro, North Carolina", "Columbia, South Carolina",
    "Charleston, South Carolina", "Richmond, Virginia", "Norfolk, Virginia",
    "Virginia Beach, Virginia", "Baltimore, Maryland", "Annapolis, Maryland",
    "Wilmington, Delaware", "Newark, New Jersey", "Jersey City, New Jersey",
    "Trenton, New Jersey", "Buffalo, New York", "Rochester, New York", "Albany, New York",
    "Syracuse, New York", "Yonkers, New York", "Hartford, Connecticut",
    "Providence, Rhode Island", "Boston, Massachusetts", "Worcester, Massachusetts",
    "Springfield, Massachusetts", "Manchester, New Hampshire", "Burlington, Vermont",
    "Bangor, Maine", "Anchorage, Alaska", "Honolulu, Hawaii",
];

pub const COMPANIES: &[&str] = &[
    "Boeing", "Intel", "Microsoft", "Google", "Apple", "Amazon", "Netflix", "Oracle",
    "Cisco", "Adobe", "Salesforce", "Nvidia", "Qualcomm", "Broadcom", "Texas Instruments",
    "General Electric", "General Motors", "Tesla", "Lockheed Martin", "Northrop Grumman",
    "Raytheon", "Honeywell", "Caterpillar", "John Deere", "Pfizer", "Moderna", "Chevron",
    "Exxon Mobil", "Walmart", "Target", "Costco", "Home Depot", "Starbucks", "Chipotle",
    "Nike", "PepsiCo", "General Mills", "IBM", "Dell Technologies", "Hewlett Packard",
    "Sony", "Toyota", "Verizon", "Comcast", "Disney", "United Airlines",
    "Delta Air Lines", "Southwest Airlines", "FedEx", "Mastercard", "Visa",
    "American Express", "Goldman Sachs", "Morgan Stanley", "Wells Fargo", "BlackRock",
    "Fidelity Investments", "Deloitte", "Accenture",
];

pub const MONTHS: &[&str] = &[
    "January", "February", "March", "April", "May", "June", "July", "August",
    "September", "October", "November", "December",
];
